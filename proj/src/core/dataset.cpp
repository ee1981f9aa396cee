#include "q2/dataset.hpp"

#include <fstream>
#include <string>
#include <unordered_set>

#include <json.hpp>

#include "q2/error.hpp"
#include "q2/text.hpp"

namespace q2 {

namespace {

using nlohmann::json;

class RecordReader {
  public:
    RecordReader(const json &record, std::size_t line) : record_(record), line_(line) {}

    template <class F> auto wrap(F &&f) const {
        try {
            return f();
        } catch (const SchemaError &e) {
            fail(e.what());
        }
    }

    std::string required_string(const char *field) const {
        auto it = record_.find(field);
        if (it == record_.end())
            fail(std::string("missing required field \"") + field + "\"");
        if (!it->is_string())
            fail(std::string("field \"") + field + "\" must be a string");
        return it->get<std::string>();
    }

    std::optional<std::string> optional_string(const char *field) const {
        auto it = record_.find(field);
        if (it == record_.end() || it->is_null())
            return std::nullopt;
        if (!it->is_string())
            fail(std::string("field \"") + field + "\" must be a string");
        return it->get<std::string>();
    }

    double required_number(const char *field) const {
        auto it = record_.find(field);
        if (it == record_.end())
            fail(std::string("missing required field \"") + field + "\"");
        if (!it->is_number())
            fail(std::string("field \"") + field + "\" must be a number");
        return it->get<double>();
    }

    std::vector<Turn> history() const {
        std::vector<Turn> turns;
        auto it = record_.find("history");
        if (it == record_.end() || it->is_null())
            return turns;
        if (!it->is_array())
            fail("field \"history\" must be an array");
        for (const auto &t : *it) {
            if (!t.is_object())
                fail("history entries must be objects");
            RecordReader inner(t, line_);
            Turn turn;
            turn.speaker = inner.wrap([&] { return parse_speaker(inner.required_string("speaker")); });
            turn.text = inner.required_string("text");
            if (trim(turn.text).empty())
                throw ValidationError("line " + std::to_string(line_) + ": history turn text is empty");
            turns.push_back(std::move(turn));
        }
        return turns;
    }

    [[noreturn]] void fail(const std::string &message) const {
        throw SchemaError("line " + std::to_string(line_) + ": " + message);
    }

  private:
    const json &record_;
    std::size_t line_;
};

DialogueExample parse_record(const json &record, SourceFormat format, std::size_t line) {
    if (!record.is_object())
        throw SchemaError("line " + std::to_string(line) + ": record must be a JSON object");
    RecordReader reader(record, line);
    DialogueExample ex;
    ex.id = reader.required_string("id");
    if (format == SourceFormat::dnli) {
        ex.knowledge = reader.required_string("premise");
        ex.response = reader.required_string("hypothesis");
        ex.system_id = reader.optional_string("system_id").value_or("dnli");
        auto label = reader.required_string("label");
        ex.gold_label = reader.wrap([&] { return map_dnli_label(label); });
    } else {
        ex.history = reader.history();
        ex.knowledge = reader.required_string("knowledge");
        ex.response = reader.required_string("response");
        ex.system_id = reader.optional_string("system_id").value_or("");
        if (auto label = reader.optional_string("gold_label"))
            ex.gold_label = reader.wrap([&] { return parse_label(*label); });
        if (format == SourceFormat::topical_usr)
            ex.human_score = reader.required_number("human_score");
        else if (record.contains("human_score") && !record["human_score"].is_null())
            ex.human_score = reader.required_number("human_score");
    }
    ex.dialogue_id = reader.optional_string("dialogue_id");
    ex.context_id = reader.optional_string("context_id");

    const auto where = "line " + std::to_string(line) + ": ";
    if (trim(ex.knowledge).empty())
        throw ValidationError(where + "knowledge is empty");
    if (trim(ex.response).empty())
        throw ValidationError(where + "response is empty");
    return ex;
}

json to_record(const DialogueExample &ex, SourceFormat format) {
    json j;
    j["id"] = ex.id;
    if (format == SourceFormat::dnli) {
        j["premise"] = ex.knowledge;
        j["hypothesis"] = ex.response;
        j["label"] = ex.gold_label == Label::consistent ? "entailment" : "contradiction";
        j["system_id"] = ex.system_id;
    } else {
        json history = json::array();
        for (const auto &t : ex.history)
            history.push_back({{"speaker", to_string(t.speaker)}, {"text", t.text}});
        j["history"] = std::move(history);
        j["knowledge"] = ex.knowledge;
        j["response"] = ex.response;
        j["system_id"] = ex.system_id;
        if (ex.gold_label)
            j["gold_label"] = to_string(*ex.gold_label);
        if (ex.human_score)
            j["human_score"] = *ex.human_score;
    }
    if (ex.dialogue_id)
        j["dialogue_id"] = *ex.dialogue_id;
    if (ex.context_id)
        j["context_id"] = *ex.context_id;
    return j;
}

} // namespace

Dataset load_dataset(std::istream &in, SourceFormat format) {
    Dataset dataset;
    dataset.source_format = format;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error &e) {
            throw ParseError(e.what(), line_no);
        }
        auto ex = parse_record(record, format, line_no);
        if (!seen.insert(ex.id).second)
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate id \"" + ex.id + "\"");
        dataset.examples.push_back(std::move(ex));
    }
    return dataset;
}

Dataset load_dataset(const std::filesystem::path &path, SourceFormat format) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open dataset " + path.string());
    try {
        return load_dataset(in, format);
    } catch (Error &e) {
        e.prepend(path.string());
        throw;
    }
}

void write_dataset(const Dataset &dataset, std::ostream &out) {
    for (const auto &ex : dataset.examples)
        out << to_record(ex, dataset.source_format).dump() << '\n';
}

void write_dataset(const Dataset &dataset, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write dataset " + path.string());
    write_dataset(dataset, out);
    if (!out)
        throw IoError("write failed for " + path.string());
}

} // namespace q2
