#include "q2/baselines.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <mutex>

#include "q2/error.hpp"
#include "q2/scoring.hpp"
#include "q2/text.hpp"

namespace q2::baselines {

std::string_view to_string(Metric m) {
    switch (m) {
    case Metric::overlap_f1:
        return "overlap";
    case Metric::bleu:
        return "bleu";
    case Metric::e2e_nli:
        return "e2e";
    case Metric::bertscore:
        return "bertscore";
    }
    return "overlap";
}

Metric parse_metric(std::string_view s) {
    if (s == "overlap" || s == "overlap_f1")
        return Metric::overlap_f1;
    if (s == "bleu")
        return Metric::bleu;
    if (s == "e2e" || s == "e2e_nli")
        return Metric::e2e_nli;
    if (s == "bertscore")
        return Metric::bertscore;
    throw PreconditionError("unknown baseline '" + std::string(s) + "'");
}

std::vector<std::string> overlap_tokens(std::string_view text) { return split_whitespace(lowercase_ascii(text)); }

double overlap_f1(std::string_view response, std::string_view knowledge) {
    const auto r = overlap_tokens(response), k = overlap_tokens(knowledge);
    if (r.empty() || k.empty())
        return (r.empty() && k.empty()) ? 1.0 : 0.0;
    std::map<std::string_view, int> counts;
    for (const auto &t : k)
        ++counts[t];
    long common = 0;
    for (const auto &t : r) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0)
        return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(r.size());
    const double recall = static_cast<double>(common) / static_cast<double>(k.size());
    return 2.0 * precision * recall / (precision + recall);
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts ngrams(const std::vector<std::string> &tokens, int order) {
    NgramCounts counts;
    const auto n = static_cast<std::size_t>(order);
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                          tokens.begin() + static_cast<long>(i + n))];
    return counts;
}

} // namespace

BleuStats bleu_stats(std::span<const std::string> responses, std::span<const std::string> knowledges,
                     int max_order) {
    if (responses.size() != knowledges.size())
        throw PreconditionError("bleu: " + std::to_string(responses.size()) + " responses vs " +
                                std::to_string(knowledges.size()) + " references");
    if (responses.empty())
        throw PreconditionError("bleu: empty corpus");
    BleuStats stats;
    stats.matches.assign(static_cast<std::size_t>(max_order), 0);
    stats.totals.assign(static_cast<std::size_t>(max_order), 0);
    for (std::size_t s = 0; s < responses.size(); ++s) {
        const auto cand = split_whitespace(responses[s]);
        const auto ref = split_whitespace(knowledges[s]);
        stats.candidate_length += static_cast<long>(cand.size());
        stats.reference_length += static_cast<long>(ref.size());
        for (int order = 1; order <= max_order; ++order) {
            const auto c = ngrams(cand, order);
            const auto r = ngrams(ref, order);
            for (const auto &[gram, count] : c) {
                stats.totals[static_cast<std::size_t>(order - 1)] += count;
                if (auto it = r.find(gram); it != r.end())
                    stats.matches[static_cast<std::size_t>(order - 1)] += std::min(count, it->second);
            }
        }
    }
    return stats;
}

double bleu_from_stats(const BleuStats &stats, const BleuOptions &options) {
    if (stats.candidate_length == 0)
        return 0.0;
    double log_sum = 0.0;
    for (std::size_t i = 0; i < stats.matches.size(); ++i) {
        double num = static_cast<double>(stats.matches[i]);
        const double den = static_cast<double>(stats.totals[i]);
        if (den == 0.0)
            return 0.0;
        if (num == 0.0) {
            if (options.smoothing == BleuSmoothing::none || i == 0)
                return 0.0;
            num = options.epsilon;
        }
        log_sum += std::log(num / den);
    }
    const double c = static_cast<double>(stats.candidate_length);
    const double r = static_cast<double>(stats.reference_length);
    const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * brevity * std::exp(log_sum / static_cast<double>(stats.matches.size()));
}

double bleu(std::span<const std::string> responses, std::span<const std::string> knowledges,
            const BleuOptions &options) {
    return bleu_from_stats(bleu_stats(responses, knowledges, options.max_order), options);
}

double e2e_nli_baseline(std::string_view response, std::string_view knowledge, const backends::Backends &backends) {
    return e2e_nli_score(knowledge, response, backends, FallbackOrientation::knowledge_premise);
}

std::optional<double> bertscore(std::string_view response, std::string_view knowledge,
                                const backends::Backends &backends) {
    auto score = backends.bertscore(response, knowledge);
    if (!score) {
        static std::once_flag warned;
        std::call_once(warned, [] { std::cerr << "warning: bertscore backend not configured; metric skipped\n"; });
    }
    return score;
}

} // namespace q2::baselines
