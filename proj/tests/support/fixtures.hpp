#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "q2/backends/mock.hpp"
#include "q2/core.hpp"

namespace q2::testing {

// Transport backed by a callable, for scripting backend replies in tests.
class FunctionTransport : public backends::Transport {
  public:
    using Fn = std::function<nlohmann::json(std::string_view, const nlohmann::json &)>;
    explicit FunctionTransport(Fn fn) : fn_(std::move(fn)) {}
    nlohmann::json call(std::string_view capability, const nlohmann::json &request) override {
        return fn_(capability, request);
    }

  private:
    Fn fn_;
};

// Paired mock corpus: every context has one consistent and one inconsistent
// response sharing a context_id; four contexts form a dialogue. Subject,
// place and attribute words are unique per context, so the template QA of one
// context never finds an answer in another context's knowledge.
struct MockFixture {
    Dataset dataset;
    backends::MockTables tables;
};

MockFixture make_mock_fixture(std::size_t contexts, std::uint64_t seed);

// Tables for the worked examples used across the suites: coffee acidity,
// pandas and a pet dog, with tables that reproduce their verdicts.
backends::MockTables walkthrough_tables();

// Writes a dataset / tables pair into `dir` and returns the two paths.
std::pair<std::filesystem::path, std::filesystem::path> write_fixture(const MockFixture &fixture,
                                                                       const std::filesystem::path &dir);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string &name);

std::string slurp(const std::filesystem::path &path);

// ----- Brute-force oracles ---------------------------------------------------

// Token F1 by explicit multiset intersection over sorted token lists.
double brute_token_f1(std::vector<std::string> a, std::vector<std::string> b);

struct BruteConfusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

BruteConfusion brute_confusion(const std::vector<double> &scores, const std::vector<Label> &labels, double t);

// Direct-formula Pearson; nullopt on zero variance or n < 2.
std::optional<double> direct_pearson(const std::vector<double> &x, const std::vector<double> &y);

// Spearman as Pearson over ranks computed by counting (rank = #less + (#equal+1)/2).
std::optional<double> direct_spearman(const std::vector<double> &x, const std::vector<double> &y);

struct OracleBootstrap {
    std::optional<double> avg;
    double lo = 0.0, hi = 0.0;
    int defined = 0;
};

// Straight-line re-implementation of the simulated-system study for a single
// mean metric: same seeded draws, own Spearman and percentile code.
OracleBootstrap oracle_bootstrap(const std::vector<std::pair<double, double>> &per_context,
                                 const std::vector<double> &c_values, int sample_size, int repeats,
                                 std::uint64_t seed);

} // namespace q2::testing
