#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "q2/error.hpp"
#include "q2/metaeval.hpp"
#include "q2/text.hpp"

namespace q2::metaeval {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char *op) {
    if (a != b)
        throw PreconditionError(std::string(op) + ": " + std::to_string(a) + " scores vs " + std::to_string(b) +
                                " labels");
}

std::optional<double> ratio(long num, long den) {
    if (den == 0)
        return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(long tp, long fp, long fn) {
    ClassMetrics m;
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    if (m.precision && m.recall) {
        const double sum = *m.precision + *m.recall;
        m.f1 = sum == 0.0 ? 0.0 : 2.0 * *m.precision * *m.recall / sum;
    }
    return m;
}

std::string opt_csv(const std::optional<double> &v) { return v ? format_double(*v) : "NA"; }

} // namespace

Confusion confusion_at(std::span<const double> scores, std::span<const Label> labels, double threshold) {
    check_lengths(scores.size(), labels.size(), "confusion_at");
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > threshold;
        const bool actual = labels[i] == Label::consistent;
        if (predicted && actual)
            ++c.tp;
        else if (predicted)
            ++c.fp;
        else if (actual)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

std::vector<PRPoint> pr_curve(std::span<const double> scores, std::span<const Label> labels,
                              std::span<const double> thresholds) {
    check_lengths(scores.size(), labels.size(), "pr_curve");
    std::vector<PRPoint> points;
    points.reserve(thresholds.size());
    for (double t : thresholds) {
        const auto c = confusion_at(scores, labels, t);
        // For the inconsistent class the roles of the cells swap.
        points.push_back({t, class_metrics(c.tp, c.fp, c.fn), class_metrics(c.tn, c.fn, c.fp)});
    }
    return points;
}

ThresholdReport classify_at_threshold(std::span<const double> scores, std::span<const Label> labels,
                                      double threshold) {
    check_lengths(scores.size(), labels.size(), "classify_at_threshold");
    if (scores.empty())
        throw PreconditionError("classify_at_threshold: no scores");
    ThresholdReport r;
    r.threshold = threshold;
    r.confusion = confusion_at(scores, labels, threshold);
    const auto &c = r.confusion;
    r.consistent = class_metrics(c.tp, c.fp, c.fn);
    r.inconsistent = class_metrics(c.tn, c.fn, c.fp);
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return r;
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]])
            ++j;
        // Positions i..j (0-based) share the mean of ranks i+1..j+1.
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw PreconditionError("pearson: length mismatch");
    const auto n = xs.size();
    if (n < 2)
        return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        return std::nullopt;
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw PreconditionError("spearman: length mismatch");
    const auto rx = average_ranks(xs), ry = average_ranks(ys);
    return pearson(rx, ry);
}

std::vector<HistogramBin> histogram(std::span<const double> values, int bins, double lo, double hi) {
    if (bins < 1 || !(hi > lo))
        throw PreconditionError("histogram: need bins >= 1 and hi > lo");
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    const double width = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) {
        out[static_cast<std::size_t>(b)].left = lo + width * b;
        out[static_cast<std::size_t>(b)].right = b + 1 == bins ? hi : lo + width * (b + 1);
    }
    for (double v : values) {
        if (v < lo || v > hi)
            continue;
        auto b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        // Guard against rounding at bin edges.
        while (b > 0 && v < out[static_cast<std::size_t>(b)].left)
            --b;
        while (b + 1 < bins && v >= out[static_cast<std::size_t>(b + 1)].left)
            ++b;
        ++out[static_cast<std::size_t>(b)].count;
    }
    return out;
}

std::string pr_curve_csv(std::span<const PRPoint> points) {
    std::ostringstream out;
    out << "threshold,class,precision,recall\n";
    for (const auto &p : points) {
        out << format_double(p.threshold) << ",consistent," << opt_csv(p.consistent.precision) << ','
            << opt_csv(p.consistent.recall) << '\n';
        out << format_double(p.threshold) << ",inconsistent," << opt_csv(p.inconsistent.precision) << ','
            << opt_csv(p.inconsistent.recall) << '\n';
    }
    return out.str();
}

std::string bootstrap_csv(const BootstrapResult &result) {
    std::ostringstream out;
    out << "metric,avg,ci_lower,ci_upper,defined_repeats,undefined_repeats\n";
    for (const auto &m : result.metrics) {
        const bool defined = m.avg_correlation.has_value();
        out << m.name << ',' << opt_csv(m.avg_correlation) << ',' << (defined ? format_double(m.ci_lower) : "NA")
            << ',' << (defined ? format_double(m.ci_upper) : "NA") << ',' << m.defined_repeats << ','
            << m.undefined_repeats << '\n';
    }
    return out.str();
}

std::string histogram_csv(std::span<const HistogramBin> bins) {
    std::ostringstream out;
    out << "bin_left,bin_right,count\n";
    for (const auto &b : bins)
        out << format_double(b.left) << ',' << format_double(b.right) << ',' << b.count << '\n';
    return out.str();
}

} // namespace q2::metaeval
