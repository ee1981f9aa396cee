#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace q2 {

enum class Speaker { user, system };

struct Turn {
    Speaker speaker = Speaker::user;
    std::string text;

    bool operator==(const Turn &) const = default;
};

enum class Label { consistent, inconsistent };

enum class SourceFormat { wow_annotated, topical_usr, dnli, generic_jsonl };

// One evaluation unit. `knowledge` is the grounding text, `response` the
// generated turn being judged. For DNLI pairs the premise lives in
// `knowledge` and the hypothesis in `response`.
struct DialogueExample {
    std::string id;
    std::vector<Turn> history;
    std::string knowledge;
    std::string response;
    std::string system_id;
    std::optional<Label> gold_label;
    // "Uses Knowledge" rating, topical_usr only.
    std::optional<double> human_score;
    // Groups turns of one conversation (random-knowledge probe).
    std::optional<std::string> dialogue_id;
    // Groups alternative responses to one dialogue context (bootstrap pairing).
    std::optional<std::string> context_id;

    bool operator==(const DialogueExample &) const = default;
};

struct Dataset {
    std::vector<DialogueExample> examples;
    SourceFormat source_format = SourceFormat::generic_jsonl;
};

std::string_view to_string(Speaker s);
std::string_view to_string(Label l);
std::string_view to_string(SourceFormat f);

// Throw SchemaError on unknown names.
Speaker parse_speaker(std::string_view s);
Label parse_label(std::string_view s);
SourceFormat parse_source_format(std::string_view s);

// DNLI three-way label to the binary consistency label: only entailment is
// consistent.
Label map_dnli_label(std::string_view nli_label);

} // namespace q2
