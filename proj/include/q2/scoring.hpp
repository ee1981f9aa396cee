#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "q2/backends/client.hpp"
#include "q2/core.hpp"
#include "q2/pipeline.hpp"

namespace q2 {

/// SQuAD-style answer normalization: lowercase, drop ASCII punctuation, drop
/// the articles a/an/the, split on whitespace.
std::vector<std::string> normalize_answer(std::string_view text);

/// Token-level F1 over normalized token multisets. Both empty -> 1, exactly
/// one empty -> 0.
double token_f1(std::string_view a, std::string_view b);

enum class VerdictPath { exact_match, nli_entailment, nli_contradiction, nli_neutral_f1, no_answer };

std::string_view to_string(VerdictPath v);
VerdictPath parse_verdict_path(std::string_view s);

struct QuestionScore {
    std::string question;
    std::string response_answer;
    std::optional<std::string> knowledge_answer;
    VerdictPath verdict_path = VerdictPath::no_answer;
    double score = 0.0;
    // Code-point offsets of response_answer within the response.
    std::size_t span_start = 0;
    std::size_t span_end = 0;

    bool operator==(const QuestionScore &) const = default;
};

struct ResponseScore {
    std::string example_id;
    std::vector<QuestionScore> question_scores;
    double value = 0.0;
    bool used_fallback = false;
    int valid_question_count = 0;
    // End-to-end NLI label when the fallback was taken.
    std::optional<backends::NliLabel> fallback_verdict;

    bool operator==(const ResponseScore &) const = default;
};

struct SystemScore {
    double value = 0.0;
    int response_count = 0;
    double question_coverage = 0.0;
    // Fraction of scored questions whose knowledge answer was no-answer; 0
    // when no question was scored at all.
    double no_answer_rate = 0.0;
    int question_count = 0;
    int fallback_count = 0;
};

double nli_label_score(backends::NliLabel label, double neutral_value);

/// Scores one (response answer, knowledge answer) pair for a question.
/// No knowledge answer -> 0; normalized exact match -> 1 without calling NLI;
/// otherwise NLI over "question answer" strings with the knowledge side as
/// premise: entailment 1, contradiction 0, neutral token F1.
QuestionScore compare_answers(std::string_view question, std::string_view response_answer,
                              const std::optional<std::string> &knowledge_answer, const backends::Backends &backends);

struct E2eVerdict {
    backends::NliLabel label;
    double score;
};

/// Whole-response NLI: entailment 1, contradiction 0, neutral 0.5.
E2eVerdict e2e_nli_verdict(std::string_view knowledge, std::string_view response, const backends::Backends &backends,
                           FallbackOrientation orientation = FallbackOrientation::knowledge_premise);
double e2e_nli_score(std::string_view knowledge, std::string_view response, const backends::Backends &backends,
                     FallbackOrientation orientation = FallbackOrientation::knowledge_premise);

/// Full metric for one example. Backend errors are rethrown with the example
/// id prefixed.
ResponseScore score_response(const DialogueExample &example, const EvalConfig &config,
                             const backends::Backends &backends);

/// Scores every example with `workers` threads; results follow dataset order.
std::vector<ResponseScore> score_dataset(const Dataset &dataset, const EvalConfig &config,
                                         const backends::Backends &backends, int workers = 1);

SystemScore score_system(std::span<const ResponseScore> scores);

/// Strict comparison: score > threshold is consistent.
Label dnli_decide(double score, double threshold);

} // namespace q2
