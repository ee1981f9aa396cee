#include "q2/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <thread>

#include "q2/error.hpp"
#include "q2/text.hpp"

namespace q2 {

namespace {

bool is_ascii_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

// Summing in sorted order makes the mean independent of input order.
double order_free_mean(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values)
        sum += v;
    return sum / static_cast<double>(values.size());
}

} // namespace

std::vector<std::string> normalize_answer(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (is_ascii_punct(c))
            continue;
        cleaned.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    }
    std::vector<std::string> tokens;
    for (auto &t : split_whitespace(cleaned))
        if (t != "a" && t != "an" && t != "the")
            tokens.push_back(std::move(t));
    return tokens;
}

double token_f1(std::string_view a, std::string_view b) {
    const auto ta = normalize_answer(a), tb = normalize_answer(b);
    if (ta.empty() || tb.empty())
        return (ta.empty() && tb.empty()) ? 1.0 : 0.0;
    std::map<std::string_view, int> counts;
    for (const auto &t : ta)
        ++counts[t];
    int common = 0;
    for (const auto &t : tb) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0)
        return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(tb.size());
    const double recall = static_cast<double>(common) / static_cast<double>(ta.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::string_view to_string(VerdictPath v) {
    switch (v) {
    case VerdictPath::exact_match:
        return "exact_match";
    case VerdictPath::nli_entailment:
        return "nli_entailment";
    case VerdictPath::nli_contradiction:
        return "nli_contradiction";
    case VerdictPath::nli_neutral_f1:
        return "nli_neutral_f1";
    case VerdictPath::no_answer:
        return "no_answer";
    }
    return "no_answer";
}

VerdictPath parse_verdict_path(std::string_view s) {
    for (auto v : {VerdictPath::exact_match, VerdictPath::nli_entailment, VerdictPath::nli_contradiction,
                   VerdictPath::nli_neutral_f1, VerdictPath::no_answer})
        if (to_string(v) == s)
            return v;
    throw SchemaError("unknown verdict '" + std::string(s) + "'");
}

double nli_label_score(backends::NliLabel label, double neutral_value) {
    switch (label) {
    case backends::NliLabel::entailment:
        return 1.0;
    case backends::NliLabel::contradiction:
        return 0.0;
    case backends::NliLabel::neutral:
        return neutral_value;
    }
    return neutral_value;
}

QuestionScore compare_answers(std::string_view question, std::string_view response_answer,
                              const std::optional<std::string> &knowledge_answer, const backends::Backends &backends) {
    if (trim(response_answer).empty())
        throw PreconditionError("compare_answers: response answer is empty");
    QuestionScore qs;
    qs.question = std::string(question);
    qs.response_answer = std::string(response_answer);
    qs.knowledge_answer = knowledge_answer;
    if (!knowledge_answer) {
        qs.verdict_path = VerdictPath::no_answer;
        qs.score = 0.0;
        return qs;
    }
    if (normalize_answer(response_answer) == normalize_answer(*knowledge_answer)) {
        qs.verdict_path = VerdictPath::exact_match;
        qs.score = 1.0;
        return qs;
    }
    const auto premise = std::string(question) + " " + *knowledge_answer;
    const auto hypothesis = std::string(question) + " " + std::string(response_answer);
    switch (backends.classify_nli(premise, hypothesis).label) {
    case backends::NliLabel::entailment:
        qs.verdict_path = VerdictPath::nli_entailment;
        qs.score = 1.0;
        break;
    case backends::NliLabel::contradiction:
        qs.verdict_path = VerdictPath::nli_contradiction;
        qs.score = 0.0;
        break;
    case backends::NliLabel::neutral:
        qs.verdict_path = VerdictPath::nli_neutral_f1;
        qs.score = token_f1(response_answer, *knowledge_answer);
        break;
    }
    return qs;
}

E2eVerdict e2e_nli_verdict(std::string_view knowledge, std::string_view response, const backends::Backends &backends,
                           FallbackOrientation orientation) {
    auto verdict = orientation == FallbackOrientation::knowledge_premise ? backends.classify_nli(knowledge, response)
                                                                         : backends.classify_nli(response, knowledge);
    return {verdict.label, nli_label_score(verdict.label, 0.5)};
}

double e2e_nli_score(std::string_view knowledge, std::string_view response, const backends::Backends &backends,
                     FallbackOrientation orientation) {
    return e2e_nli_verdict(knowledge, response, backends, orientation).score;
}

ResponseScore score_response(const DialogueExample &example, const EvalConfig &config,
                             const backends::Backends &backends) {
    try {
        if (trim(example.knowledge).empty() || trim(example.response).empty())
            throw PreconditionError("knowledge and response must be non-empty");
        ResponseScore rs;
        rs.example_id = example.id;
        auto questions = build_questions(example.response, config, backends);
        rs.valid_question_count = static_cast<int>(questions.selected.size());
        if (questions.selected.empty()) {
            auto v = e2e_nli_verdict(example.knowledge, example.response, backends, config.fallback_orientation);
            rs.used_fallback = true;
            rs.fallback_verdict = v.label;
            rs.value = v.score;
            return rs;
        }
        std::vector<double> values;
        for (const auto &q : questions.selected) {
            auto qa = knowledge_answer(q.text, example.knowledge, backends);
            std::optional<std::string> k_answer;
            if (qa.answer)
                k_answer = qa.answer->text;
            auto qs = compare_answers(q.text, q.source_span.text, k_answer, backends);
            qs.span_start = q.source_span.char_start;
            qs.span_end = q.source_span.char_end;
            values.push_back(qs.score);
            rs.question_scores.push_back(std::move(qs));
        }
        rs.value = order_free_mean(std::move(values));
        return rs;
    } catch (Error &e) {
        e.prepend("example " + example.id);
        throw;
    }
}

std::vector<ResponseScore> score_dataset(const Dataset &dataset, const EvalConfig &config,
                                         const backends::Backends &backends, int workers) {
    const auto n = dataset.examples.size();
    std::vector<ResponseScore> out(n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = score_response(dataset.examples[i], config, backends);
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto work = [&] {
        for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                out[i] = score_response(dataset.examples[i], config, backends);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w)
        pool.emplace_back(work);
    pool.clear();
    // Report the first failure in dataset order, whatever finished first.
    for (const auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

SystemScore score_system(std::span<const ResponseScore> scores) {
    if (scores.empty())
        throw PreconditionError("score_system: no responses");
    SystemScore s;
    s.response_count = static_cast<int>(scores.size());
    std::vector<double> values;
    int covered = 0, no_answer = 0;
    for (const auto &r : scores) {
        values.push_back(r.value);
        if (r.valid_question_count >= 1)
            ++covered;
        if (r.used_fallback)
            ++s.fallback_count;
        for (const auto &q : r.question_scores) {
            ++s.question_count;
            if (q.verdict_path == VerdictPath::no_answer)
                ++no_answer;
        }
    }
    s.value = order_free_mean(std::move(values));
    s.question_coverage = static_cast<double>(covered) / static_cast<double>(scores.size());
    s.no_answer_rate = s.question_count == 0 ? 0.0 : static_cast<double>(no_answer) / s.question_count;
    return s;
}

Label dnli_decide(double score, double threshold) {
    if (!(score >= 0.0 && score <= 1.0))
        throw PreconditionError("dnli_decide: score outside [0,1]");
    return score > threshold ? Label::consistent : Label::inconsistent;
}

} // namespace q2
