#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace q2::cli {

// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kOther = 1,
    kUsage = 2,
    kIo = 3,
    kInput = 4, // parse, schema or validation error in an input file
    kCacheMiss = 5,
    kBackend = 6, // transport or protocol failure
    kPrecondition = 7,
};

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics to `err`.
int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace q2::cli
