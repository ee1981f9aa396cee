#include "q2/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "q2/error.hpp"
#include "q2/scoring.hpp"
#include "q2/text.hpp"

namespace q2 {

namespace {

std::string normalized_key(std::string_view text) {
    std::string key;
    for (const auto &t : normalize_answer(text)) {
        if (!key.empty())
            key.push_back(' ');
        key += t;
    }
    return key;
}

} // namespace

std::string_view to_string(SpanKind k) { return k == SpanKind::entity ? "entity" : "noun_phrase"; }

std::string_view to_string(QuestionStatus s) {
    switch (s) {
    case QuestionStatus::valid:
        return "valid";
    case QuestionStatus::filtered_roundtrip:
        return "filtered_roundtrip";
    case QuestionStatus::filtered_personal:
        return "filtered_personal";
    case QuestionStatus::filtered_duplicate:
        return "filtered_duplicate";
    }
    return "valid";
}

std::string_view to_string(Variant v) { return v == Variant::top1_filtered ? "top1_filtered" : "all_n"; }
std::string_view to_string(Decoding d) { return d == Decoding::beam ? "beam" : "greedy"; }
std::string_view to_string(EvalMode m) { return m == EvalMode::wow ? "wow" : "dnli"; }
std::string_view to_string(FallbackOrientation o) {
    return o == FallbackOrientation::knowledge_premise ? "knowledge-premise" : "response-premise";
}

Variant parse_variant(std::string_view s) {
    if (s == "top1" || s == "top1_filtered" || s == "top1-filtered")
        return Variant::top1_filtered;
    if (s == "all-n" || s == "all_n")
        return Variant::all_n;
    throw PreconditionError("unknown variant '" + std::string(s) + "'");
}

Decoding parse_decoding(std::string_view s) {
    if (s == "beam")
        return Decoding::beam;
    if (s == "greedy")
        return Decoding::greedy;
    throw PreconditionError("unknown decoding '" + std::string(s) + "'");
}

EvalMode parse_eval_mode(std::string_view s) {
    if (s == "wow")
        return EvalMode::wow;
    if (s == "dnli")
        return EvalMode::dnli;
    throw PreconditionError("unknown mode '" + std::string(s) + "'");
}

FallbackOrientation parse_fallback_orientation(std::string_view s) {
    if (s == "knowledge-premise" || s == "knowledge_premise")
        return FallbackOrientation::knowledge_premise;
    if (s == "response-premise" || s == "response_premise")
        return FallbackOrientation::response_premise;
    throw PreconditionError("unknown fallback orientation '" + std::string(s) + "'");
}

std::vector<InformativeSpan> merge_candidates(const backends::AnnotationResult &annotation) {
    std::vector<InformativeSpan> all;
    for (const auto &e : annotation.entities)
        all.push_back({e.text, e.start, e.end, SpanKind::entity});
    for (const auto &np : annotation.noun_phrases)
        all.push_back({np.text, np.start, np.end, SpanKind::noun_phrase});
    // Entities sort ahead of noun phrases at the same offset.
    std::stable_sort(all.begin(), all.end(), [](const auto &a, const auto &b) {
        return std::tie(a.char_start, a.char_end, a.kind) < std::tie(b.char_start, b.char_end, b.kind);
    });

    std::map<std::string, std::size_t> index_of_key;
    std::vector<InformativeSpan> kept;
    for (const auto &span : all) {
        auto key = normalized_key(span.text);
        if (key.empty())
            continue;
        auto [it, inserted] = index_of_key.try_emplace(key, kept.size());
        if (inserted)
            kept.push_back(span);
        else if (span.kind == SpanKind::entity)
            kept[it->second].kind = SpanKind::entity;
    }
    return kept;
}

std::vector<InformativeSpan> extract_candidates(std::string_view response, const backends::Backends &backends) {
    if (trim(response).empty())
        throw PreconditionError("extract_candidates: response is empty");
    return merge_candidates(backends.annotate_spans(response));
}

bool validate_roundtrip(const CandidateQuestion &question, std::string_view response,
                        const backends::Backends &backends, bool strict) {
    auto qa = backends.answer_question(question.text, response);
    if (!qa.answer)
        return false;
    if (strict)
        return qa.answer->text == question.source_span.text;
    return normalize_answer(qa.answer->text) == normalize_answer(question.source_span.text);
}

bool filter_personal(std::string_view question, const std::optional<std::vector<backends::ParseToken>> &parses) {
    const auto tokens = word_tokens(question);
    for (const auto &t : tokens)
        if (t == "my" || t == "your")
            return true;
    if (parses) {
        for (const auto &p : *parses) {
            auto token = lowercase_ascii(p.token);
            if ((token == "i" || token == "you") &&
                (p.dependency_role == "nsubj" || p.dependency_role == "nsubjpass" || p.dependency_role == "csubj"))
                return true;
        }
        return false;
    }
    for (const auto &t : tokens)
        if (t == "i" || t == "you")
            return true;
    return false;
}

std::vector<CandidateQuestion> select_questions(const std::vector<std::vector<CandidateQuestion>> &per_span,
                                                Variant variant) {
    std::vector<CandidateQuestion> out;
    for (const auto &questions : per_span) {
        for (const auto &q : questions) {
            if (q.status != QuestionStatus::valid)
                continue;
            out.push_back(q);
            if (variant == Variant::top1_filtered)
                break;
        }
    }
    return out;
}

backends::QAResult knowledge_answer(std::string_view question, std::string_view knowledge,
                                    const backends::Backends &backends) {
    return backends.answer_question(question, knowledge);
}

QuestionSet build_questions(std::string_view response, const EvalConfig &config, const backends::Backends &backends) {
    QuestionSet set;
    set.spans = extract_candidates(response, backends);
    const int top_n = config.effective_top_n();
    const int beam = config.effective_beam_size();

    std::vector<std::vector<CandidateQuestion>> per_span;
    per_span.reserve(set.spans.size());
    for (const auto &span : set.spans) {
        auto generated = backends.generate_questions(span.text, response, beam, top_n);
        std::vector<CandidateQuestion> questions;
        std::set<std::string> seen;
        int rank = 0;
        for (const auto &g : generated.questions) {
            CandidateQuestion q{g.text, span, ++rank, QuestionStatus::valid};
            if (trim(q.text).empty())
                q.status = QuestionStatus::filtered_roundtrip;
            else if (!seen.insert(lowercase_ascii(trim(q.text))).second)
                q.status = QuestionStatus::filtered_duplicate;
            else if (!validate_roundtrip(q, response, backends, config.strict_roundtrip))
                q.status = QuestionStatus::filtered_roundtrip;
            else if (config.personal_filter_enabled()) {
                std::optional<std::vector<backends::ParseToken>> parses;
                if (config.parse_questions)
                    parses = backends.annotate_spans(q.text).parses;
                if (filter_personal(q.text, parses))
                    q.status = QuestionStatus::filtered_personal;
            }
            questions.push_back(std::move(q));
        }
        per_span.push_back(std::move(questions));
    }

    set.selected = select_questions(per_span, config.variant);
    for (auto &qs : per_span)
        for (auto &q : qs)
            set.candidates.push_back(std::move(q));
    return set;
}

} // namespace q2
