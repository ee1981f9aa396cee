#pragma once

#include <filesystem>
#include <istream>
#include <ostream>

#include "q2/core.hpp"

namespace q2 {

/// Reads a JSONL dataset and normalizes it into DialogueExamples.
///
/// Records are returned in file order. Blank lines are skipped. Errors:
/// ParseError (bad JSON, with line number), SchemaError (missing or mistyped
/// field, naming the field and line), ValidationError (duplicate id, empty
/// knowledge/response/turn text), IoError (unreadable file).
Dataset load_dataset(const std::filesystem::path &path, SourceFormat format);
Dataset load_dataset(std::istream &in, SourceFormat format);

/// Writes `dataset` in its own source_format so that load_dataset reproduces
/// it exactly. DNLI examples are written back as premise/hypothesis pairs;
/// their original three-way label is not recoverable and is written as
/// "entailment" (consistent) or "contradiction" (inconsistent).
void write_dataset(const Dataset &dataset, const std::filesystem::path &path);
void write_dataset(const Dataset &dataset, std::ostream &out);

} // namespace q2
