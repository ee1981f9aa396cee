#include "q2/core.hpp"

#include <string>

#include "q2/error.hpp"

namespace q2 {

std::string_view to_string(Speaker s) { return s == Speaker::user ? "user" : "system"; }

std::string_view to_string(Label l) { return l == Label::consistent ? "consistent" : "inconsistent"; }

std::string_view to_string(SourceFormat f) {
    switch (f) {
    case SourceFormat::wow_annotated:
        return "wow_annotated";
    case SourceFormat::topical_usr:
        return "topical_usr";
    case SourceFormat::dnli:
        return "dnli";
    case SourceFormat::generic_jsonl:
        return "generic_jsonl";
    }
    return "generic_jsonl";
}

Speaker parse_speaker(std::string_view s) {
    if (s == "user")
        return Speaker::user;
    if (s == "system")
        return Speaker::system;
    throw SchemaError("unknown speaker '" + std::string(s) + "'");
}

Label parse_label(std::string_view s) {
    if (s == "consistent")
        return Label::consistent;
    if (s == "inconsistent")
        return Label::inconsistent;
    throw SchemaError("unknown gold_label '" + std::string(s) + "'");
}

SourceFormat parse_source_format(std::string_view s) {
    if (s == "wow_annotated" || s == "wow")
        return SourceFormat::wow_annotated;
    if (s == "topical_usr" || s == "topical")
        return SourceFormat::topical_usr;
    if (s == "dnli")
        return SourceFormat::dnli;
    if (s == "generic_jsonl" || s == "jsonl")
        return SourceFormat::generic_jsonl;
    throw SchemaError("unknown dataset format '" + std::string(s) + "'");
}

Label map_dnli_label(std::string_view nli_label) {
    if (nli_label == "entailment" || nli_label == "positive")
        return Label::consistent;
    if (nli_label == "neutral" || nli_label == "contradiction" || nli_label == "negative")
        return Label::inconsistent;
    throw SchemaError("unknown DNLI label '" + std::string(nli_label) + "'");
}

} // namespace q2
