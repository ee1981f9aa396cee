#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "q2/backends/client.hpp"

namespace q2::baselines {

enum class Metric { overlap_f1, bleu, e2e_nli, bertscore };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

// Lowercased whitespace tokens, punctuation and articles kept. This is the
// overlap tokenizer, distinct from the SQuAD normalization used by Q2 itself.
std::vector<std::string> overlap_tokens(std::string_view text);

/// Unigram F1 between overlap_tokens(response) and overlap_tokens(knowledge).
double overlap_f1(std::string_view response, std::string_view knowledge);

enum class BleuSmoothing { none, add_epsilon };

struct BleuOptions {
    int max_order = 4;
    BleuSmoothing smoothing = BleuSmoothing::add_epsilon;
    // Numerator used for an order with zero matches under add_epsilon.
    double epsilon = 0.1;
};

struct BleuStats {
    std::vector<long> matches;  // per order
    std::vector<long> totals;   // per order
    long candidate_length = 0;
    long reference_length = 0;
};

/// Corpus BLEU with response as candidate and knowledge as single reference,
/// on a 0-100 scale. Throws PreconditionError on length mismatch or empty input.
double bleu(std::span<const std::string> responses, std::span<const std::string> knowledges,
            const BleuOptions &options = {});

BleuStats bleu_stats(std::span<const std::string> responses, std::span<const std::string> knowledges,
                     int max_order = 4);
double bleu_from_stats(const BleuStats &stats, const BleuOptions &options = {});

/// End-to-end NLI with knowledge as premise: 1 / 0.5 / 0.
double e2e_nli_baseline(std::string_view response, std::string_view knowledge, const backends::Backends &backends);

/// Passes through the bertscore backend's F1; nullopt (skipped) when no
/// bertscore backend is configured.
std::optional<double> bertscore(std::string_view response, std::string_view knowledge,
                                const backends::Backends &backends);

} // namespace q2::baselines
