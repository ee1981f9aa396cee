#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "q2/backends/client.hpp"

namespace q2 {

enum class SpanKind { entity, noun_phrase };

// Informative span of a response (a candidate answer). Offsets are code
// points into the response.
struct InformativeSpan {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    SpanKind kind = SpanKind::noun_phrase;

    bool operator==(const InformativeSpan &) const = default;
};

enum class QuestionStatus { valid, filtered_roundtrip, filtered_personal, filtered_duplicate };

struct CandidateQuestion {
    std::string text;
    InformativeSpan source_span;
    int beam_rank = 1; // 1-based position in the generator's output
    QuestionStatus status = QuestionStatus::valid;
};

enum class Variant { top1_filtered, all_n };
enum class Decoding { beam, greedy };
enum class EvalMode { wow, dnli };
// Which side the end-to-end NLI fallback treats as premise.
enum class FallbackOrientation { knowledge_premise, response_premise };

struct EvalConfig {
    int top_n = 5;
    int beam_size = 5;
    Variant variant = Variant::top1_filtered;
    Decoding decoding = Decoding::beam;
    EvalMode mode = EvalMode::wow;
    bool personal_filter = true;
    double dnli_threshold = 0.1;
    // Round-trip check with exact string equality instead of normalized equality.
    bool strict_roundtrip = false;
    // Ask the annotator for a dependency parse of each question before the
    // pronoun filter; used only if the annotator returns one.
    bool parse_questions = true;
    FallbackOrientation fallback_orientation = FallbackOrientation::knowledge_premise;
    std::uint64_t seed = 0;

    // Greedy decoding asks for a single question per span.
    int effective_top_n() const { return decoding == Decoding::greedy ? 1 : top_n; }
    int effective_beam_size() const { return decoding == Decoding::greedy ? 1 : std::max(beam_size, top_n); }
    // The pronoun filter is never applied in dnli mode.
    bool personal_filter_enabled() const { return personal_filter && mode != EvalMode::dnli; }
};

std::string_view to_string(SpanKind k);
std::string_view to_string(QuestionStatus s);
std::string_view to_string(Variant v);
std::string_view to_string(Decoding d);
std::string_view to_string(EvalMode m);
std::string_view to_string(FallbackOrientation o);
Variant parse_variant(std::string_view s);
Decoding parse_decoding(std::string_view s);
EvalMode parse_eval_mode(std::string_view s);
FallbackOrientation parse_fallback_orientation(std::string_view s);

/// Merges entity and noun-phrase spans: grouped by normalized text, the
/// earliest occurrence is kept and labelled entity if any member of its group
/// is one. Spans that normalize to nothing (a bare article) are dropped.
/// Result is ordered by char_start.
std::vector<InformativeSpan> merge_candidates(const backends::AnnotationResult &annotation);

std::vector<InformativeSpan> extract_candidates(std::string_view response, const backends::Backends &backends);

/// True iff QA over the response answers `question` with its source span
/// (normalized equality, or exact equality when `strict`).
bool validate_roundtrip(const CandidateQuestion &question, std::string_view response,
                        const backends::Backends &backends, bool strict = false);

/// True means discard: "my"/"your" anywhere, or "i"/"you" as subject. With a
/// parse, subject means a nsubj/nsubjpass/csubj dependency role; without one
/// any whole-token "i"/"you" counts.
bool filter_personal(std::string_view question, const std::optional<std::vector<backends::ParseToken>> &parses);

/// `per_span` holds one list per span, each ordered by beam_rank.
std::vector<CandidateQuestion> select_questions(const std::vector<std::vector<CandidateQuestion>> &per_span,
                                                Variant variant);

backends::QAResult knowledge_answer(std::string_view question, std::string_view knowledge,
                                    const backends::Backends &backends);

struct QuestionSet {
    std::vector<InformativeSpan> spans;
    // Every generated question with its status, ordered by (span char_start, beam_rank).
    std::vector<CandidateQuestion> candidates;
    std::vector<CandidateQuestion> selected;
};

/// Spans -> questions -> duplicate / round-trip / pronoun filtering ->
/// variant selection, for one response.
QuestionSet build_questions(std::string_view response, const EvalConfig &config, const backends::Backends &backends);

} // namespace q2
