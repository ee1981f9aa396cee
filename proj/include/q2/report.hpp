#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "q2/core.hpp"
#include "q2/scoring.hpp"

namespace q2 {

enum class ReportFormat { jsonl, csv };

ReportFormat parse_report_format(std::string_view s);

// One report line: a response score plus the example metadata that
// meta-evaluation needs (labels, grouping, human ratings) and any baseline
// values computed alongside.
struct ReportRecord {
    ResponseScore score;
    std::string system_id;
    std::optional<Label> gold_label;
    std::optional<double> human_score;
    std::optional<std::string> dialogue_id;
    std::optional<std::string> context_id;
    std::map<std::string, double> baselines;

    bool operator==(const ReportRecord &) const = default;
};

ReportRecord make_record(const DialogueExample &example, ResponseScore score);

nlohmann::json to_json(const ReportRecord &record);
ReportRecord record_from_json(const nlohmann::json &j);

/// JSONL: one {"id","q2","used_fallback","valid_question_count","questions":[...],...}
/// object per line. CSV: header plus one row per response; the per-question
/// explanations are a JSON array in the "questions" column. Throws IoError
/// when the path cannot be written.
void write_report(std::span<const ReportRecord> records, const std::filesystem::path &path, ReportFormat format);
void write_report(std::span<const ResponseScore> scores, const std::filesystem::path &path, ReportFormat format);
std::string render_report(std::span<const ReportRecord> records, ReportFormat format);

/// Reads a JSONL report back; scores round-trip bit-exactly.
std::vector<ReportRecord> read_report(const std::filesystem::path &path);

// RFC 4180 field quoting.
std::string csv_field(std::string_view value);

// Writes `content` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path &path, std::string_view content);

} // namespace q2
