#include <iostream>
#include <string>
#include <vector>

#include "q2/cli.hpp"

int main(int argc, char **argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return q2::cli::dispatch(args, std::cout, std::cerr);
}
