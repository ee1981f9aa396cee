#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "q2/dataset.hpp"
#include "q2/random.hpp"

namespace q2::testing {

namespace {

const std::vector<std::string> kSyllables = {"ka", "lo", "mi", "ter", "zu", "ran", "vel", "os", "pri", "dun",
                                             "sa", "gor", "ne", "fi", "bal", "to", "rek", "ish", "mar", "quo"};
const std::vector<std::string> kVerbs = {"founded", "built", "discovered", "painted", "recorded", "designed"};

class Namer {
  public:
    explicit Namer(std::mt19937_64 &rng) : rng_(rng) {}

    std::string word(bool capitalized) {
        for (;;) {
            std::string w;
            for (int i = 0; i < 3; ++i)
                w += kSyllables[bounded(rng_, kSyllables.size())];
            if (!used_.insert(w).second)
                continue;
            if (capitalized)
                w[0] = static_cast<char>(w[0] - 'a' + 'A');
            return w;
        }
    }

  private:
    std::mt19937_64 &rng_;
    std::set<std::string> used_;
};

} // namespace

MockFixture make_mock_fixture(std::size_t contexts, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 7));
    Namer namer(rng);
    MockFixture f;
    f.dataset.source_format = SourceFormat::generic_jsonl;
    f.tables.annotator.parses = true;

    auto uniform = [&] { return static_cast<double>(rng() >> 11) / 9007199254740992.0; };

    for (std::size_t k = 0; k < contexts; ++k) {
        const auto subject = namer.word(true);
        const auto place = namer.word(true);
        const auto other_place = namer.word(true);
        const auto attr = namer.word(false);
        const auto wrong_attr = namer.word(false);
        const auto &verb = kVerbs[bounded(rng, kVerbs.size())];
        f.tables.annotator.entities[subject] = "ORG";
        f.tables.annotator.entities[place] = "GPE";
        f.tables.annotator.entities[other_place] = "GPE";

        const auto knowledge =
            subject + " is known for " + attr + ". " + subject + " was " + verb + " in " + place + ".";
        const auto fact = subject + " is known for " + attr + ".";
        const auto event = subject + " was " + verb + " in " + place + ".";

        std::string consistent, inconsistent;
        const double pick = uniform();
        if (pick < 0.5)
            consistent = fact;
        else if (pick < 0.8)
            consistent = event;
        else if (pick < 0.9)
            consistent = "I am fond of " + subject + ".";
        else
            consistent = "That sounds lovely to me.";
        const double pick2 = uniform();
        if (pick2 < 0.5)
            inconsistent = subject + " is known for " + wrong_attr + ".";
        else if (pick2 < 0.9)
            inconsistent = subject + " was " + verb + " in " + other_place + ".";
        else
            inconsistent = "Honestly I could not say.";

        const auto context_id = "ctx" + std::to_string(k);
        const auto dialogue_id = "dlg" + std::to_string(k / 4);
        for (int variant = 0; variant < 2; ++variant) {
            DialogueExample ex;
            ex.id = context_id + (variant == 0 ? "_c" : "_i");
            ex.history = {Turn{Speaker::user, "Tell me about " + subject + "."}};
            ex.knowledge = knowledge;
            ex.response = variant == 0 ? consistent : inconsistent;
            ex.system_id = variant == 0 ? "grounded" : "hallucinating";
            ex.gold_label = variant == 0 ? Label::consistent : Label::inconsistent;
            ex.human_score = (variant == 0 ? 2.0 : 1.0) + uniform();
            ex.dialogue_id = dialogue_id;
            ex.context_id = context_id;
            f.dataset.examples.push_back(std::move(ex));
        }
    }
    return f;
}

backends::MockTables walkthrough_tables() {
    backends::MockTables t;
    t.annotator.entities = {{"Madonna", "PERSON"},
                            {"New York City", "GPE"},
                            {"Red Hot Chili Peppers", "ORG"},
                            {"Los Angeles", "GPE"},
                            {"LA", "GPE"},
                            {"Sephora", "ORG"}};
    t.annotator.noun_phrases = {"coffee", "vulnerable species", "conservation", "cats", "a dog"};
    t.annotator.parses = true;
    t.qa.answers = {{"What are they reliant on?", {"conservation", "vulnerable species"}},
                    {"Where were the Red Hot Chili Peppers formed?", {"Los Angeles", "LA"}}};
    t.nli.aliases = {{"LA", "Los Angeles"}};
    t.nli.pairs = {{"I have a dog", "I do not have a dog", backends::NliLabel::contradiction}};
    return t;
}

std::pair<std::filesystem::path, std::filesystem::path> write_fixture(const MockFixture &fixture,
                                                                       const std::filesystem::path &dir) {
    const auto dataset = dir / "dataset.jsonl";
    const auto tables = dir / "tables.json";
    write_dataset(fixture.dataset, dataset);
    std::ofstream(tables) << fixture.tables.to_json().dump(2) << '\n';
    return {dataset, tables};
}

std::filesystem::path scratch_dir(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / ("q2_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double brute_token_f1(std::vector<std::string> a, std::vector<std::string> b) {
    if (a.empty() && b.empty())
        return 1.0;
    if (a.empty() || b.empty())
        return 0.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::string> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    if (common.empty())
        return 0.0;
    const double p = static_cast<double>(common.size()) / static_cast<double>(a.size());
    const double r = static_cast<double>(common.size()) / static_cast<double>(b.size());
    return 2 * p * r / (p + r);
}

BruteConfusion brute_confusion(const std::vector<double> &scores, const std::vector<Label> &labels, double t) {
    BruteConfusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > t;
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

std::optional<double> direct_pearson(const std::vector<double> &x, const std::vector<double> &y) {
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2)
        return std::nullopt;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0)
        return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::optional<double> direct_spearman(const std::vector<double> &x, const std::vector<double> &y) {
    auto ranks = [](const std::vector<double> &v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (double w : v) {
                less += w < v[i];
                equal += w == v[i];
            }
            r[i] = less + (equal + 1) / 2;
        }
        return r;
    };
    return direct_pearson(ranks(x), ranks(y));
}

OracleBootstrap oracle_bootstrap(const std::vector<std::pair<double, double>> &per_context,
                                 const std::vector<double> &c_values, int sample_size, int repeats,
                                 std::uint64_t seed) {
    std::vector<double> human;
    for (double c : c_values)
        human.push_back(1.0 - c);
    std::vector<double> defined;
    for (int rep = 0; rep < repeats; ++rep) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
        std::vector<double> system;
        for (double c : c_values) {
            const int quota = static_cast<int>(std::llround(std::floor(c * sample_size + 0.5 + 1e-9)));
            double sum = 0;
            for (int slot = 0; slot < sample_size; ++slot) {
                const auto ctx = bounded(rng, per_context.size());
                sum += slot < quota ? per_context[ctx].second : per_context[ctx].first;
            }
            system.push_back(sum / sample_size);
        }
        if (auto rho = direct_spearman(system, human))
            defined.push_back(*rho);
    }
    OracleBootstrap out;
    out.defined = static_cast<int>(defined.size());
    if (defined.empty())
        return out;
    double sum = 0;
    for (double d : defined)
        sum += d;
    out.avg = sum / static_cast<double>(defined.size());
    std::sort(defined.begin(), defined.end());
    auto pct = [&](double p) {
        const double pos = p / 100.0 * static_cast<double>(defined.size() - 1);
        const auto k = static_cast<std::size_t>(pos);
        const double next = k + 1 < defined.size() ? defined[k + 1] : defined[k];
        return defined[k] + (next - defined[k]) * (pos - static_cast<double>(k));
    };
    out.lo = std::min(pct(2.5), *out.avg);
    out.hi = std::max(pct(97.5), *out.avg);
    return out;
}

} // namespace q2::testing
