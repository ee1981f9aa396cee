#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "q2/error.hpp"
#include "q2/metaeval.hpp"
#include "q2/random.hpp"

namespace q2::metaeval {

SystemMetric mean_metric(std::string name, std::vector<std::pair<double, double>> per_context) {
    auto table = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(per_context));
    return {std::move(name), [table](std::span<const ResponseRef> drawn) {
                double sum = 0.0;
                for (const auto &r : drawn) {
                    const auto &pair = (*table).at(r.context);
                    sum += r.inconsistent ? pair.second : pair.first;
                }
                return drawn.empty() ? 0.0 : sum / static_cast<double>(drawn.size());
            }};
}

int inconsistent_quota(double c, int sample_size) {
    // The epsilon keeps products like 0.15 * 350 = 52.4999... on the intended side.
    return static_cast<int>(std::floor(c * sample_size + 0.5 + 1e-9));
}

double percentile(std::span<const double> sorted, double p) {
    if (sorted.empty())
        throw PreconditionError("percentile of empty sequence");
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

BootstrapResult bootstrap_system_eval(std::size_t context_count, std::span<const SystemMetric> metrics,
                                      const BootstrapConfig &config) {
    if (context_count == 0)
        throw PreconditionError("bootstrap: no paired contexts");
    if (config.c_values.size() < 2)
        throw PreconditionError("bootstrap: need at least two c values");
    for (double c : config.c_values)
        if (!(c > 0.0 && c < 1.0))
            throw PreconditionError("bootstrap: c values must lie in (0,1)");
    if (config.sample_size <= 0 || config.repeats <= 0)
        throw PreconditionError("bootstrap: sample_size and repeats must be positive");

    const auto systems = config.c_values.size();
    std::vector<double> human(systems);
    for (std::size_t s = 0; s < systems; ++s)
        human[s] = 1.0 - config.c_values[s];

    const auto repeats = static_cast<std::size_t>(config.repeats);
    // correlations[repeat][metric]
    std::vector<std::vector<std::optional<double>>> correlations(repeats);

    auto run_repeat = [&](std::size_t rep) {
        std::mt19937_64 rng(derive_seed(config.seed, rep));
        std::vector<std::vector<double>> system_scores(metrics.size(), std::vector<double>(systems));
        std::vector<ResponseRef> drawn(static_cast<std::size_t>(config.sample_size));
        for (std::size_t s = 0; s < systems; ++s) {
            const int quota = inconsistent_quota(config.c_values[s], config.sample_size);
            for (int slot = 0; slot < config.sample_size; ++slot)
                drawn[static_cast<std::size_t>(slot)] = {static_cast<std::size_t>(bounded(rng, context_count)),
                                                         slot < quota};
            for (std::size_t m = 0; m < metrics.size(); ++m)
                system_scores[m][s] = metrics[m].score(drawn);
        }
        auto &row = correlations[rep];
        row.resize(metrics.size());
        for (std::size_t m = 0; m < metrics.size(); ++m)
            row[m] = spearman(system_scores[m], human);
    };

    if (config.workers <= 1) {
        for (std::size_t rep = 0; rep < repeats; ++rep)
            run_repeat(rep);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < config.workers; ++w)
            pool.emplace_back([&] {
                for (auto rep = next.fetch_add(1); rep < repeats; rep = next.fetch_add(1))
                    run_repeat(rep);
            });
    }

    BootstrapResult result;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        MetricCorrelation mc;
        mc.name = metrics[m].name;
        std::vector<double> defined;
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            if (correlations[rep][m])
                defined.push_back(*correlations[rep][m]);
            else
                ++mc.undefined_repeats;
        }
        mc.defined_repeats = static_cast<int>(defined.size());
        if (!defined.empty()) {
            double sum = 0.0;
            for (double v : defined)
                sum += v;
            const double avg = sum / static_cast<double>(defined.size());
            std::sort(defined.begin(), defined.end());
            mc.avg_correlation = avg;
            mc.ci_lower = std::min(percentile(defined, 2.5), avg);
            mc.ci_upper = std::max(percentile(defined, 97.5), avg);
        }
        result.metrics.push_back(std::move(mc));
    }
    return result;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_by_context(std::span<const ReportRecord> records) {
    struct Slots {
        std::optional<std::size_t> consistent, inconsistent;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, Slots> by_context;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto &r = records[i];
        if (!r.context_id || !r.gold_label)
            continue;
        auto [it, inserted] = by_context.try_emplace(*r.context_id);
        if (inserted)
            order.push_back(*r.context_id);
        auto &slot = *r.gold_label == Label::consistent ? it->second.consistent : it->second.inconsistent;
        if (!slot)
            slot = i;
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto &id : order) {
        const auto &s = by_context.at(id);
        if (s.consistent && s.inconsistent)
            pairs.emplace_back(*s.consistent, *s.inconsistent);
    }
    return pairs;
}

} // namespace q2::metaeval
