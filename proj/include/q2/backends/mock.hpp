#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "q2/backends/transport.hpp"
#include "q2/backends/types.hpp"

namespace q2::backends {

// Rule tables for the in-repo reference backends. Every mock is a pure
// function of its table, so runs against mocks are fully reproducible.
//
// JSON form (all sections optional):
//   {"annotator": {"entities": {"Madonna": "PERSON"}, "noun_phrases": ["coffee"],
//                  "parses": true},
//    "qg":        {"questions": {"coffee": ["What is very acidic?"]}, "templates": true},
//    "qa":        {"answers": {"What are they reliant on?": ["conservation"]},
//                  "templates": true},
//    "nli":       {"pairs": [{"premise": "...", "hypothesis": "...", "label": "contradiction"}],
//                  "aliases": {"LA": "Los Angeles"}, "negation": true, "default": "neutral"},
//    "bertscore": {"equal": 1.0, "default": 0.5}}
struct MockTables {
    struct Annotator {
        // Surface form -> entity label. Matched case-insensitively on word boundaries.
        std::map<std::string, std::string> entities;
        std::vector<std::string> noun_phrases;
        // Emit a heuristic dependency parse (pronoun subject detection only).
        bool parses = false;
    } annotator;

    struct QuestionGen {
        // Span -> explicit questions, emitted before template questions.
        std::map<std::string, std::vector<std::string>> questions;
        // "X is Y." -> "What is Y?" and "they are reliant on X" -> "What are they reliant on?".
        bool templates = true;
    } qg;

    struct QuestionAnswer {
        // Question -> candidate answers; the first that occurs in the context wins.
        std::map<std::string, std::vector<std::string>> answers;
        // Invert the QG templates by locating the question's remainder in the context.
        bool templates = true;
    } qa;

    struct Nli {
        struct Pair {
            std::string premise;
            std::string hypothesis;
            NliLabel label;
        };
        std::vector<Pair> pairs;
        // Short form -> long form; applied before equality comparison.
        std::map<std::string, std::string> aliases;
        // Equal up to negation words with differing negation parity -> contradiction.
        bool negation = true;
        NliLabel fallback = NliLabel::neutral;
    } nli;

    struct BertScore {
        double equal = 1.0;
        double fallback = 0.5;
    } bertscore;

    static MockTables from_json(const nlohmann::json &j);
    static MockTables load(const std::string &path);
    nlohmann::json to_json() const;
};

// Serves all five capabilities from MockTables behind the wire format.
class MockBackend : public Transport {
  public:
    explicit MockBackend(MockTables tables) : tables_(std::move(tables)) {}

    nlohmann::json call(std::string_view capability, const nlohmann::json &request) override;

    AnnotationResult annotate(std::string_view text) const;
    QGResult generate(std::string_view span, std::string_view context, int top_n) const;
    QAResult answer(std::string_view question, std::string_view context) const;
    NLIVerdict classify(std::string_view premise, std::string_view hypothesis) const;
    double bertscore(std::string_view candidate, std::string_view reference) const;

    const MockTables &tables() const { return tables_; }

  private:
    MockTables tables_;
};

} // namespace q2::backends
