#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "q2/backends/client.hpp"
#include "q2/core.hpp"
#include "q2/pipeline.hpp"
#include "q2/report.hpp"
#include "q2/scoring.hpp"

namespace q2::metaeval {

// Precision/recall/F1 of one class; nullopt where the denominator is empty.
struct ClassMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

// Counts with "consistent" as the positive class.
struct Confusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

struct PRPoint {
    double threshold = 0.0;
    ClassMetrics consistent;
    ClassMetrics inconsistent;
};

struct ThresholdReport {
    double threshold = 0.5;
    ClassMetrics consistent;
    ClassMetrics inconsistent;
    double accuracy = 0.0;
    Confusion confusion;
};

/// score > t predicts consistent.
Confusion confusion_at(std::span<const double> scores, std::span<const Label> labels, double threshold);

std::vector<PRPoint> pr_curve(std::span<const double> scores, std::span<const Label> labels,
                              std::span<const double> thresholds);

ThresholdReport classify_at_threshold(std::span<const double> scores, std::span<const Label> labels,
                                      double threshold = 0.5);

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> xs);

// nullopt for fewer than two points or zero variance on either side.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct BootstrapConfig {
    std::vector<double> c_values = {0.05, 0.1, 0.15, 0.2, 0.25};
    int sample_size = 350;
    int repeats = 1000;
    std::uint64_t seed = 0;
    // Repeats run in parallel; results are identical to the serial run.
    int workers = 1;
};

// One drawn response of a simulated system.
struct ResponseRef {
    std::size_t context = 0;
    bool inconsistent = false;
};

// System-level score of a simulated system from its drawn responses.
struct SystemMetric {
    std::string name;
    std::function<double(std::span<const ResponseRef>)> score;
};

// System score = mean of per-response scores; `per_context[i]` holds the
// (consistent, inconsistent) response scores of context i.
SystemMetric mean_metric(std::string name, std::vector<std::pair<double, double>> per_context);

struct MetricCorrelation {
    std::string name;
    std::optional<double> avg_correlation;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    int defined_repeats = 0;
    int undefined_repeats = 0;
};

struct BootstrapResult {
    std::vector<MetricCorrelation> metrics;
};

/// Number of drawn slots given the inconsistent response: round-half-up(c * n).
int inconsistent_quota(double c, int sample_size);

/// Linear-interpolation percentile (p in [0,100]) of an ascending sequence.
double percentile(std::span<const double> sorted, double p);

/// Simulated-system correlation study. For every repeat and every c, draws
/// sample_size contexts uniformly with replacement, gives the first
/// inconsistent_quota(c) slots their inconsistent response and the rest their
/// consistent one, scores the system with each metric, and takes Spearman
/// against the human reference 1 - c. Averages over repeats with a defined
/// correlation; the CI is the 2.5/97.5 percentile range, widened if needed so
/// that it contains the average.
BootstrapResult bootstrap_system_eval(std::size_t context_count, std::span<const SystemMetric> metrics,
                                      const BootstrapConfig &config);

/// Indices (consistent, inconsistent) of records sharing a context_id; the
/// first record of each label wins, and contexts without both are skipped.
/// Context order follows first appearance.
std::vector<std::pair<std::size_t, std::size_t>> pair_by_context(std::span<const ReportRecord> records);

struct DnliResult {
    double accuracy = 0.0;
    long correct = 0;
    long total = 0;
    std::vector<Label> predictions;
    std::vector<ResponseScore> scores;
};

/// Scores every pair, thresholds with dnli_decide and compares with the gold
/// labels. Requires config.mode == dnli and a gold label on every example.
DnliResult dnli_evaluate(const Dataset &dataset, const EvalConfig &config, const backends::Backends &backends,
                         int workers = 1);

/// Accuracy of precomputed decisions against gold labels.
DnliResult dnli_accuracy(std::span<const ResponseScore> scores, std::span<const Label> gold, double threshold);

enum class ProbeMode { same_dialogue, cross_dialogue };

std::string_view to_string(ProbeMode m);
ProbeMode parse_probe_mode(std::string_view s);

/// Seeded source index for every example's replacement knowledge. Same
/// dialogue: a random cyclic permutation inside each dialogue_id group (each
/// group needs >= 2 turns). Cross dialogue: a uniformly chosen example from
/// another dialogue (examples without dialogue_id are their own dialogue).
std::vector<std::size_t> knowledge_mapping(const Dataset &dataset, ProbeMode mode, std::uint64_t seed);

/// Copy of `dataset` with knowledge[i] = knowledge[mapping[i]]. Rejects
/// mappings with a fixed point.
Dataset apply_knowledge_mapping(const Dataset &dataset, std::span<const std::size_t> mapping);

struct ProbeResult {
    double q2 = 0.0;
    double no_answer_rate = 0.0;
    std::vector<std::size_t> mapping;
    std::vector<ResponseScore> scores;
};

ProbeResult random_knowledge_probe(const Dataset &dataset, ProbeMode mode, std::uint64_t seed,
                                   const EvalConfig &config, const backends::Backends &backends, int workers = 1);

struct LengthStats {
    std::size_t count = 0;
    double avg_characters = 0.0;
    double avg_tokens = 0.0;
};

/// Mean response length per gold label: code points and whitespace tokens.
std::map<Label, LengthStats> length_stats(const Dataset &dataset);

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    long count = 0;
};

/// Equal-width bins over [lo, hi]; the last bin is closed on the right.
std::vector<HistogramBin> histogram(std::span<const double> values, int bins, double lo = 0.0, double hi = 1.0);

// CSV exports.
std::string pr_curve_csv(std::span<const PRPoint> points);
std::string bootstrap_csv(const BootstrapResult &result);
std::string histogram_csv(std::span<const HistogramBin> bins);

} // namespace q2::metaeval
