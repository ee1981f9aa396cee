#include <algorithm>
#include <map>
#include <random>

#include "q2/error.hpp"
#include "q2/metaeval.hpp"
#include "q2/random.hpp"
#include "q2/text.hpp"

namespace q2::metaeval {

DnliResult dnli_accuracy(std::span<const ResponseScore> scores, std::span<const Label> gold, double threshold) {
    if (scores.size() != gold.size())
        throw PreconditionError("dnli: score and label counts differ");
    if (scores.empty())
        throw PreconditionError("dnli: no examples");
    DnliResult r;
    r.total = static_cast<long>(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto predicted = dnli_decide(scores[i].value, threshold);
        r.predictions.push_back(predicted);
        if (predicted == gold[i])
            ++r.correct;
    }
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
    r.scores.assign(scores.begin(), scores.end());
    return r;
}

DnliResult dnli_evaluate(const Dataset &dataset, const EvalConfig &config, const backends::Backends &backends,
                         int workers) {
    if (config.mode != EvalMode::dnli)
        throw PreconditionError("dnli_evaluate requires dnli mode");
    std::vector<Label> gold;
    for (const auto &ex : dataset.examples) {
        if (!ex.gold_label)
            throw ValidationError("dnli_evaluate: example " + ex.id + " has no gold label");
        gold.push_back(*ex.gold_label);
    }
    const auto scores = score_dataset(dataset, config, backends, workers);
    return dnli_accuracy(scores, gold, config.dnli_threshold);
}

std::string_view to_string(ProbeMode m) { return m == ProbeMode::same_dialogue ? "same_dialogue" : "cross_dialogue"; }

ProbeMode parse_probe_mode(std::string_view s) {
    if (s == "same_dialogue" || s == "same-dialogue" || s == "same")
        return ProbeMode::same_dialogue;
    if (s == "cross_dialogue" || s == "cross-dialogue" || s == "cross")
        return ProbeMode::cross_dialogue;
    throw PreconditionError("unknown probe mode '" + std::string(s) + "'");
}

std::vector<std::size_t> knowledge_mapping(const Dataset &dataset, ProbeMode mode, std::uint64_t seed) {
    const auto n = dataset.examples.size();
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::vector<std::size_t> mapping(n);
    auto dialogue_of = [&](std::size_t i) -> const std::string & {
        const auto &ex = dataset.examples[i];
        return ex.dialogue_id ? *ex.dialogue_id : ex.id;
    };

    if (mode == ProbeMode::same_dialogue) {
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i) {
            if (!dataset.examples[i].dialogue_id)
                throw ValidationError("same-dialogue probe: example " + dataset.examples[i].id +
                                      " has no dialogue_id");
            groups[dialogue_of(i)].push_back(i);
        }
        for (const auto &[dialogue, members] : groups) {
            if (members.size() < 2)
                throw ValidationError("same-dialogue probe: dialogue " + dialogue + " has fewer than 2 turns");
            // Sattolo's algorithm: a uniformly random single cycle, so no turn keeps its own knowledge.
            std::vector<std::size_t> cycle = members;
            for (std::size_t i = cycle.size() - 1; i > 0; --i)
                std::swap(cycle[i], cycle[bounded(rng, i)]);
            for (std::size_t k = 0; k < members.size(); ++k)
                mapping[members[k]] = cycle[k];
        }
        return mapping;
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
            if (dialogue_of(j) != dialogue_of(i))
                others.push_back(j);
        if (others.empty())
            throw ValidationError("cross-dialogue probe: example " + dataset.examples[i].id +
                                  " has no other dialogue to draw knowledge from");
        mapping[i] = others[bounded(rng, others.size())];
    }
    return mapping;
}

Dataset apply_knowledge_mapping(const Dataset &dataset, std::span<const std::size_t> mapping) {
    if (mapping.size() != dataset.examples.size())
        throw PreconditionError("knowledge mapping size does not match dataset");
    Dataset out = dataset;
    for (std::size_t i = 0; i < mapping.size(); ++i) {
        if (mapping[i] >= mapping.size())
            throw PreconditionError("knowledge mapping index out of range");
        if (mapping[i] == i)
            throw PreconditionError("knowledge mapping keeps example " + dataset.examples[i].id +
                                    " on its own knowledge");
        out.examples[i].knowledge = dataset.examples[mapping[i]].knowledge;
    }
    return out;
}

ProbeResult random_knowledge_probe(const Dataset &dataset, ProbeMode mode, std::uint64_t seed,
                                   const EvalConfig &config, const backends::Backends &backends, int workers) {
    ProbeResult r;
    r.mapping = knowledge_mapping(dataset, mode, seed);
    const auto probed = apply_knowledge_mapping(dataset, r.mapping);
    r.scores = score_dataset(probed, config, backends, workers);
    const auto system = score_system(r.scores);
    r.q2 = system.value;
    r.no_answer_rate = system.no_answer_rate;
    return r;
}

std::map<Label, LengthStats> length_stats(const Dataset &dataset) {
    std::map<Label, LengthStats> stats;
    std::map<Label, std::pair<double, double>> sums;
    for (const auto &ex : dataset.examples) {
        if (!ex.gold_label)
            throw ValidationError("length_stats: example " + ex.id + " has no gold label");
        auto &s = stats[*ex.gold_label];
        auto &sum = sums[*ex.gold_label];
        ++s.count;
        sum.first += static_cast<double>(utf8_length(ex.response));
        sum.second += static_cast<double>(split_whitespace(ex.response).size());
    }
    for (auto &[label, s] : stats) {
        s.avg_characters = sums[label].first / static_cast<double>(s.count);
        s.avg_tokens = sums[label].second / static_cast<double>(s.count);
    }
    return stats;
}

} // namespace q2::metaeval
