#include "q2/report.hpp"

#include <fstream>
#include <sstream>

#include "q2/error.hpp"
#include "q2/text.hpp"

namespace q2 {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view s) {
    if (s == "jsonl")
        return ReportFormat::jsonl;
    if (s == "csv")
        return ReportFormat::csv;
    throw PreconditionError("unknown report format '" + std::string(s) + "'");
}

ReportRecord make_record(const DialogueExample &example, ResponseScore score) {
    ReportRecord r;
    r.score = std::move(score);
    r.system_id = example.system_id;
    r.gold_label = example.gold_label;
    r.human_score = example.human_score;
    r.dialogue_id = example.dialogue_id;
    r.context_id = example.context_id;
    return r;
}

namespace {

json questions_json(const ResponseScore &s) {
    json qs = json::array();
    for (const auto &q : s.question_scores) {
        qs.push_back({{"text", q.question},
                      {"span", {q.span_start, q.span_end}},
                      {"response_answer", q.response_answer},
                      {"knowledge_answer", q.knowledge_answer ? json(*q.knowledge_answer) : json(nullptr)},
                      {"verdict", to_string(q.verdict_path)},
                      {"score", q.score}});
    }
    return qs;
}

} // namespace

json to_json(const ReportRecord &record) {
    const auto &s = record.score;
    json j = {{"id", s.example_id},
              {"q2", s.value},
              {"used_fallback", s.used_fallback},
              {"valid_question_count", s.valid_question_count},
              {"questions", questions_json(s)}};
    if (s.fallback_verdict)
        j["fallback_verdict"] = backends::to_string(*s.fallback_verdict);
    if (!record.system_id.empty())
        j["system_id"] = record.system_id;
    if (record.gold_label)
        j["gold_label"] = to_string(*record.gold_label);
    if (record.human_score)
        j["human_score"] = *record.human_score;
    if (record.dialogue_id)
        j["dialogue_id"] = *record.dialogue_id;
    if (record.context_id)
        j["context_id"] = *record.context_id;
    if (!record.baselines.empty())
        j["baselines"] = record.baselines;
    return j;
}

ReportRecord record_from_json(const json &j) {
    try {
        ReportRecord r;
        auto &s = r.score;
        s.example_id = j.at("id").get<std::string>();
        s.value = j.at("q2").get<double>();
        s.used_fallback = j.at("used_fallback").get<bool>();
        for (const auto &q : j.at("questions")) {
            QuestionScore qs;
            qs.question = q.at("text").get<std::string>();
            const auto &span = q.at("span");
            qs.span_start = span.at(0).get<std::size_t>();
            qs.span_end = span.at(1).get<std::size_t>();
            qs.response_answer = q.at("response_answer").get<std::string>();
            if (!q.at("knowledge_answer").is_null())
                qs.knowledge_answer = q.at("knowledge_answer").get<std::string>();
            qs.verdict_path = parse_verdict_path(q.at("verdict").get<std::string>());
            qs.score = q.at("score").get<double>();
            s.question_scores.push_back(std::move(qs));
        }
        s.valid_question_count = j.value("valid_question_count", static_cast<int>(s.question_scores.size()));
        if (auto it = j.find("fallback_verdict"); it != j.end())
            s.fallback_verdict = backends::parse_nli_label(it->get<std::string>());
        r.system_id = j.value("system_id", std::string());
        if (auto it = j.find("gold_label"); it != j.end() && !it->is_null())
            r.gold_label = parse_label(it->get<std::string>());
        if (auto it = j.find("human_score"); it != j.end() && !it->is_null())
            r.human_score = it->get<double>();
        if (auto it = j.find("dialogue_id"); it != j.end() && !it->is_null())
            r.dialogue_id = it->get<std::string>();
        if (auto it = j.find("context_id"); it != j.end() && !it->is_null())
            r.context_id = it->get<std::string>();
        if (auto it = j.find("baselines"); it != j.end())
            r.baselines = it->get<std::map<std::string, double>>();
        return r;
    } catch (const json::exception &e) {
        throw SchemaError(std::string("report record: ") + e.what());
    } catch (const ProtocolError &e) {
        throw SchemaError(std::string("report record: ") + e.what());
    }
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\n\r") == std::string_view::npos)
        return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string render_report(std::span<const ReportRecord> records, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::jsonl) {
        for (const auto &r : records)
            out << to_json(r).dump() << '\n';
        return out.str();
    }
    out << "id,system_id,gold_label,q2,used_fallback,valid_question_count,questions\n";
    for (const auto &r : records) {
        const auto &s = r.score;
        out << csv_field(s.example_id) << ',' << csv_field(r.system_id) << ','
            << (r.gold_label ? to_string(*r.gold_label) : "") << ',' << format_double(s.value) << ','
            << (s.used_fallback ? "true" : "false") << ',' << s.valid_question_count << ','
            << csv_field(questions_json(s).dump()) << '\n';
    }
    return out.str();
}

void write_text_file(const std::filesystem::path &path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw IoError("write failed for " + path.string());
}

void write_report(std::span<const ReportRecord> records, const std::filesystem::path &path, ReportFormat format) {
    write_text_file(path, render_report(records, format));
}

void write_report(std::span<const ResponseScore> scores, const std::filesystem::path &path, ReportFormat format) {
    std::vector<ReportRecord> records;
    records.reserve(scores.size());
    for (const auto &s : scores) {
        ReportRecord r;
        r.score = s;
        records.push_back(std::move(r));
    }
    write_report(records, path, format);
}

std::vector<ReportRecord> read_report(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open report " + path.string());
    std::vector<ReportRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error &e) {
            throw ParseError(path.string() + ": " + e.what(), line_no);
        }
        try {
            records.push_back(record_from_json(j));
        } catch (Error &e) {
            e.prepend(path.string() + ": line " + std::to_string(line_no));
            throw;
        }
    }
    return records;
}

} // namespace q2
