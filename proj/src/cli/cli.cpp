#include "q2/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "q2/backends/client.hpp"
#include "q2/backends/mock.hpp"
#include "q2/backends/transcript.hpp"
#include "q2/backends/transport.hpp"
#include "q2/baselines.hpp"
#include "q2/dataset.hpp"
#include "q2/error.hpp"
#include "q2/metaeval.hpp"
#include "q2/report.hpp"
#include "q2/scoring.hpp"
#include "q2/text.hpp"

namespace q2::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> kSourceFormats = {"wow_annotated", "topical_usr", "dnli", "generic_jsonl"};

// ---------------------------------------------------------------------------
// Options

struct BackendOptions {
    bool mocks = false;
    std::string mock_tables;
    std::string backends_config;
    std::string transcript;
    std::string transcript_mode = "record";
    double timeout = 300.0;
};

struct EvalOptions {
    int top_n = 5;
    int beam_size = 5;
    std::string variant = "top1";
    std::string decoding = "beam";
    std::string mode = "wow";
    bool no_personal_filter = false;
    double dnli_threshold = 0.1;
    bool strict_roundtrip = false;
    bool no_parse_questions = false;
    std::string fallback_orientation = "knowledge-premise";
    std::uint64_t seed = 0;
    int workers = 1;
};

struct OutputOptions {
    std::string out;
    std::string manifest;
};

void add_backend_options(CLI::App &app, BackendOptions &o) {
    app.add_flag("--mocks", o.mocks, "Serve every capability from the in-repo mock backends");
    app.add_option("--mock-tables", o.mock_tables, "JSON rule tables for the mock backends")->check(CLI::ExistingFile);
    app.add_option("--backends", o.backends_config, "JSON file routing each capability to http, stdio or mock");
    app.add_option("--transcript", o.transcript, "Request/response transcript (JSONL)");
    app.add_option("--transcript-mode", o.transcript_mode, "record, replay or passthrough")
        ->check(CLI::IsMember({"record", "replay", "passthrough"}));
    app.add_option("--timeout", o.timeout, "Per-request timeout for HTTP backends, seconds");
}

void add_eval_options(CLI::App &app, EvalOptions &o, bool with_mode) {
    app.add_option("--top-n", o.top_n, "Questions kept per span")->check(CLI::PositiveNumber);
    app.add_option("--beam-size", o.beam_size, "Beam width for question generation")->check(CLI::PositiveNumber);
    app.add_option("--variant", o.variant, "top1 or all-n")->check(CLI::IsMember({"top1", "top1_filtered", "all-n", "all_n"}));
    app.add_option("--decoding", o.decoding, "beam or greedy")->check(CLI::IsMember({"beam", "greedy"}));
    if (with_mode)
        app.add_option("--mode", o.mode, "wow or dnli")->check(CLI::IsMember({"wow", "dnli"}));
    app.add_flag("--no-personal-filter", o.no_personal_filter, "Keep questions about the speaker or listener");
    app.add_flag("--strict-roundtrip", o.strict_roundtrip, "Round-trip check by exact string equality");
    app.add_flag("--no-parse-questions", o.no_parse_questions,
                 "Do not request a parse of each question for the pronoun filter");
    app.add_option("--fallback-orientation", o.fallback_orientation, "knowledge-premise or response-premise")
        ->check(CLI::IsMember({"knowledge-premise", "response-premise", "knowledge_premise", "response_premise"}));
    app.add_option("--seed", o.seed, "Random seed");
    app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
}

void add_output_options(CLI::App &app, OutputOptions &o, const std::string &what) {
    app.add_option("--out", o.out, what);
    app.add_option("--manifest", o.manifest, "Manifest path (default: <out>.manifest.json)");
}

EvalConfig make_eval_config(const EvalOptions &o) {
    EvalConfig c;
    c.top_n = o.top_n;
    c.beam_size = o.beam_size;
    c.variant = parse_variant(o.variant);
    c.decoding = parse_decoding(o.decoding);
    c.mode = parse_eval_mode(o.mode);
    c.personal_filter = !o.no_personal_filter;
    c.dnli_threshold = o.dnli_threshold;
    c.strict_roundtrip = o.strict_roundtrip;
    c.parse_questions = !o.no_parse_questions;
    c.fallback_orientation = parse_fallback_orientation(o.fallback_orientation);
    c.seed = o.seed;
    return c;
}

json to_json(const EvalConfig &c, int workers) {
    return {{"top_n", c.top_n},
            {"beam_size", c.beam_size},
            {"variant", to_string(c.variant)},
            {"decoding", to_string(c.decoding)},
            {"mode", to_string(c.mode)},
            {"personal_filter", c.personal_filter},
            {"dnli_threshold", c.dnli_threshold},
            {"strict_roundtrip", c.strict_roundtrip},
            {"parse_questions", c.parse_questions},
            {"fallback_orientation", to_string(c.fallback_orientation)},
            {"seed", c.seed},
            {"workers", workers}};
}

// ---------------------------------------------------------------------------
// Files and hashes

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json file_entry(const std::string &path) {
    if (path.empty())
        return nullptr;
    return {{"path", path}, {"sha256", backends::sha256_hex(read_file(path))}};
}

// Config file (INI/TOML, read by CLI11) to flag tokens. Values go in front
// of the command-line flags so that, with last-value-wins options, flags
// override the file. "true"/"false" toggle flags.
std::vector<std::string> config_tokens(const std::string &path) {
    if (!fs::exists(path))
        throw IoError("cannot read config " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::Error &e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
    std::vector<std::string> tokens;
    for (const auto &item : items) {
        if (item.name == "++" || item.name == "--")
            continue; // section markers
        const auto key = "--" + item.fullname();
        if (item.inputs.size() == 1 && item.inputs[0] == "true") {
            tokens.push_back(key);
        } else if (!(item.inputs.size() == 1 && item.inputs[0] == "false")) {
            tokens.push_back(key);
            tokens.insert(tokens.end(), item.inputs.begin(), item.inputs.end());
        }
    }
    return tokens;
}

std::vector<std::string> expand_config(const std::vector<std::string> &args) {
    std::optional<std::string> config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config = args[i].substr(9);
    }
    if (!config)
        return args;
    std::size_t command_words = 0;
    while (command_words < args.size() && command_words < 2 && args[command_words].rfind("-", 0) != 0)
        ++command_words;
    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(command_words));
    auto tokens = config_tokens(*config);
    out.insert(out.end(), tokens.begin(), tokens.end());
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(command_words), args.end());
    return out;
}

// ---------------------------------------------------------------------------
// Backends

struct BackendSetup {
    std::shared_ptr<backends::Backends> backends;
    std::shared_ptr<backends::Transcript> transcript;
    backends::TranscriptMode mode = backends::TranscriptMode::passthrough;
    std::vector<std::string> configured;
};

std::vector<std::string> command_argv(const json &spec) {
    std::vector<std::string> argv;
    if (spec.is_string())
        argv = split_whitespace(spec.get<std::string>());
    else if (spec.is_array())
        for (const auto &a : spec) {
            if (!a.is_string())
                throw SchemaError("stdio command entries must be strings");
            argv.push_back(a.get<std::string>());
        }
    if (argv.empty())
        throw SchemaError("stdio backend needs a non-empty \"command\"");
    return argv;
}

std::shared_ptr<backends::Transport> make_transport(const json &spec, const BackendOptions &o,
                                                    const std::function<std::shared_ptr<backends::Transport>()> &mock) {
    if (!spec.is_object())
        throw SchemaError("backend entries must be objects");
    const auto kind = spec.value("transport", std::string("http"));
    if (kind == "mock")
        return mock();
    if (kind == "http") {
        if (!spec.contains("url") || !spec["url"].is_string())
            throw SchemaError("http backend needs a \"url\"");
        return std::make_shared<backends::HttpTransport>(spec["url"].get<std::string>(),
                                                         spec.value("timeout", o.timeout));
    }
    if (kind == "stdio")
        return std::make_shared<backends::StdioTransport>(command_argv(spec.value("command", json())));
    throw SchemaError("unknown transport \"" + kind + "\"");
}

BackendSetup build_backends(const BackendOptions &o) {
    using namespace backends;
    BackendSetup setup;
    setup.mode = parse_transcript_mode(o.transcript_mode);
    if (setup.mode == TranscriptMode::replay && o.transcript.empty())
        throw PreconditionError("--transcript-mode replay needs --transcript");

    std::shared_ptr<Transport> mock_backend;
    auto mock = [&]() -> std::shared_ptr<Transport> {
        if (!mock_backend)
            mock_backend = std::make_shared<MockBackend>(o.mock_tables.empty() ? MockTables{}
                                                                                : MockTables::load(o.mock_tables));
        return mock_backend;
    };

    std::map<std::string, std::shared_ptr<Transport>> live;
    if (o.mocks)
        for (auto cap : kCapabilities)
            live[std::string(cap)] = mock();
    if (!o.backends_config.empty()) {
        json config;
        try {
            config = json::parse(read_file(o.backends_config));
        } catch (const json::parse_error &e) {
            throw SchemaError(o.backends_config + ": invalid JSON: " + e.what());
        }
        if (!config.is_object())
            throw SchemaError(o.backends_config + ": expected a JSON object");
        for (const auto &[key, value] : config.items()) {
            if (key != "default" &&
                std::find(kCapabilities.begin(), kCapabilities.end(), key) == kCapabilities.end())
                throw SchemaError(o.backends_config + ": unknown capability \"" + key + "\"");
        }
        try {
            std::shared_ptr<Transport> fallback;
            if (config.contains("default"))
                fallback = make_transport(config["default"], o, mock);
            for (auto cap : kCapabilities) {
                const std::string name(cap);
                if (config.contains(name))
                    live[name] = make_transport(config[name], o, mock);
                else if (fallback && cap != kBertScore)
                    live[name] = fallback;
            }
        } catch (Error &e) {
            e.prepend(o.backends_config);
            throw;
        }
    }

    if (!o.transcript.empty())
        setup.transcript = Transcript::load(o.transcript, setup.mode);

    setup.backends = std::make_shared<Backends>();
    for (auto cap : kCapabilities) {
        const std::string name(cap);
        auto it = live.find(name);
        const bool have_live = it != live.end();
        if (have_live)
            setup.configured.push_back(name);
        if (cap == kBertScore && !have_live)
            continue;
        if (!have_live && !(setup.transcript && setup.mode == TranscriptMode::replay))
            throw PreconditionError("no backend for capability '" + name +
                                    "'; use --mocks, --backends or a replay transcript");
        auto inner = have_live ? it->second : nullptr;
        if (setup.transcript)
            setup.backends->set(name, std::make_shared<TranscriptTransport>(setup.transcript, inner));
        else
            setup.backends->set(name, inner);
    }
    return setup;
}

json backend_config_json(const BackendOptions &o, const BackendSetup &s) {
    json j = {{"mocks", o.mocks},
              {"mock_tables", file_entry(o.mock_tables)},
              {"backends", file_entry(o.backends_config)},
              {"timeout", o.timeout},
              {"live_capabilities", s.configured}};
    return j;
}

// Saves a recorded transcript and describes it for the manifest.
json finish_transcript(const BackendOptions &o, const BackendSetup &s) {
    if (!s.transcript)
        return nullptr;
    if (s.mode == backends::TranscriptMode::record)
        s.transcript->save(o.transcript);
    json j = {{"path", o.transcript}, {"mode", to_string(s.mode)}, {"entries", s.transcript->size()}};
    j["sha256"] = fs::exists(o.transcript) ? json(backends::sha256_hex(read_file(o.transcript))) : json(nullptr);
    return j;
}

// Saves whatever a record run collected before an error, then rethrows.
template <class F> auto with_transcript_saved(const BackendOptions &o, const BackendSetup &s, F &&f) {
    try {
        return f();
    } catch (...) {
        if (s.transcript && s.mode == backends::TranscriptMode::record) {
            try {
                s.transcript->save(o.transcript);
            } catch (...) {
            }
        }
        throw;
    }
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
    json body;

    Manifest(const std::string &command, const std::vector<std::string> &argv) {
        body["command"] = command;
        body["argv"] = argv;
        body["config"] = json::object();
        body["inputs"] = json::object();
        body["outputs"] = json::object();
        body["transcript"] = nullptr;
    }

    void finalize() {
        body["config_hash"] = backends::sha256_hex(backends::canonical_json(body["config"]));
        body["seed"] = body["config"].value("seed", json(0));
    }

    // Writes the manifest next to the primary output, or returns it for
    // inclusion in the stdout summary when there is no output file.
    std::optional<json> emit(const OutputOptions &o) {
        finalize();
        fs::path path = o.manifest;
        if (path.empty() && !o.out.empty())
            path = o.out + ".manifest.json";
        if (path.empty())
            return body;
        write_text_file(path, body.dump(2) + "\n");
        return std::nullopt;
    }
};

void print_summary(std::ostream &out, json summary, std::optional<json> manifest) {
    if (manifest)
        summary["manifest"] = std::move(*manifest);
    out << summary.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Helpers

template <class F> void parallel_for(std::size_t n, int workers, F &&f) {
    std::vector<std::exception_ptr> errors(n);
    auto body = [&](std::size_t i) {
        try {
            f(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w)
            pool.emplace_back([&] {
                for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                    body(i);
            });
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ','))
        if (auto t = trim(item); !t.empty())
            out.emplace_back(t);
    return out;
}

json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

json class_metrics_json(const metaeval::ClassMetrics &m) {
    return {{"precision", optional_json(m.precision)}, {"recall", optional_json(m.recall)}, {"f1", optional_json(m.f1)}};
}

ReportFormat report_format_for(const std::string &flag, const std::string &out) {
    if (!flag.empty())
        return parse_report_format(flag);
    return fs::path(out).extension() == ".csv" ? ReportFormat::csv : ReportFormat::jsonl;
}

void sort_by_id(std::vector<ReportRecord> &records) {
    std::sort(records.begin(), records.end(),
              [](const ReportRecord &a, const ReportRecord &b) { return a.score.example_id < b.score.example_id; });
}

double metric_value(const ReportRecord &r, const std::string &metric) {
    if (metric == "q2")
        return r.score.value;
    auto it = r.baselines.find(metric);
    if (it == r.baselines.end())
        throw ValidationError("record " + r.score.example_id + " has no value for metric '" + metric + "'");
    return it->second;
}

// Metrics present on every record: q2 first, then baselines by name.
std::vector<std::string> shared_metrics(const std::vector<const ReportRecord *> &records) {
    std::vector<std::string> names = {"q2"};
    if (records.empty())
        return names;
    for (const auto &[name, value] : records.front()->baselines) {
        bool everywhere = std::all_of(records.begin(), records.end(),
                                      [&](const ReportRecord *r) { return r->baselines.count(name) > 0; });
        if (everywhere)
            names.push_back(name);
    }
    return names;
}

// ---------------------------------------------------------------------------
// score

struct ScoreCommand {
    std::string dataset;
    std::string format = "generic_jsonl";
    std::string report_format;
    std::string baselines;
    EvalOptions eval;
    BackendOptions backend;
    OutputOptions output;
};

json system_baselines(const std::vector<const ReportRecord *> &records,
                      const std::vector<const DialogueExample *> &examples,
                      const std::vector<baselines::Metric> &metrics) {
    json j = json::object();
    for (auto m : metrics) {
        const std::string name(baselines::to_string(m));
        if (m == baselines::Metric::bleu) {
            std::vector<std::string> responses, knowledges;
            for (const auto *ex : examples) {
                responses.push_back(ex->response);
                knowledges.push_back(ex->knowledge);
            }
            j[name] = baselines::bleu(responses, knowledges);
            continue;
        }
        std::vector<double> values;
        for (const auto *r : records)
            if (auto it = r->baselines.find(name); it != r->baselines.end())
                values.push_back(it->second);
        if (values.empty())
            continue;
        std::sort(values.begin(), values.end());
        double sum = 0.0;
        for (double v : values)
            sum += v;
        j[name] = sum / static_cast<double>(values.size());
    }
    return j;
}

int run_score(const ScoreCommand &cmd, const std::vector<std::string> &argv, std::ostream &out) {
    if (cmd.output.out.empty())
        throw PreconditionError("score needs --out");
    const auto dataset = load_dataset(cmd.dataset, parse_source_format(cmd.format));
    const auto config = make_eval_config(cmd.eval);
    std::vector<baselines::Metric> metrics;
    for (const auto &name : split_list(cmd.baselines))
        metrics.push_back(baselines::parse_metric(name));

    auto setup = build_backends(cmd.backend);
    const auto &backends = *setup.backends;

    auto records = with_transcript_saved(cmd.backend, setup, [&] {
        const auto scores = score_dataset(dataset, config, backends, cmd.eval.workers);
        std::vector<ReportRecord> recs;
        for (std::size_t i = 0; i < scores.size(); ++i)
            recs.push_back(make_record(dataset.examples[i], scores[i]));
        if (!metrics.empty())
            parallel_for(recs.size(), cmd.eval.workers, [&](std::size_t i) {
                const auto &ex = dataset.examples[i];
                auto &b = recs[i].baselines;
                for (auto m : metrics) {
                    const std::string name(baselines::to_string(m));
                    switch (m) {
                    case baselines::Metric::overlap_f1:
                        b[name] = baselines::overlap_f1(ex.response, ex.knowledge);
                        break;
                    case baselines::Metric::bleu: {
                        const std::string r[] = {ex.response}, k[] = {ex.knowledge};
                        b[name] = baselines::bleu(r, k);
                        break;
                    }
                    case baselines::Metric::e2e_nli:
                        b[name] = baselines::e2e_nli_baseline(ex.response, ex.knowledge, backends);
                        break;
                    case baselines::Metric::bertscore:
                        if (auto v = baselines::bertscore(ex.response, ex.knowledge, backends))
                            b[name] = *v;
                        break;
                    }
                }
            });
        return recs;
    });

    // Summary, overall and per system.
    std::vector<ResponseScore> all_scores;
    std::map<std::string, std::vector<std::size_t>> by_system;
    for (std::size_t i = 0; i < records.size(); ++i) {
        all_scores.push_back(records[i].score);
        by_system[records[i].system_id].push_back(i);
    }
    auto summarize = [&](const std::vector<std::size_t> &idx) {
        std::vector<ResponseScore> scores;
        std::vector<const ReportRecord *> recs;
        std::vector<const DialogueExample *> exs;
        for (auto i : idx) {
            scores.push_back(records[i].score);
            recs.push_back(&records[i]);
            exs.push_back(&dataset.examples[i]);
        }
        const auto s = score_system(scores);
        return json{{"q2", s.value},
                    {"response_count", s.response_count},
                    {"question_coverage", s.question_coverage},
                    {"no_answer_rate", s.no_answer_rate},
                    {"question_count", s.question_count},
                    {"fallback_count", s.fallback_count},
                    {"baselines", system_baselines(recs, exs, metrics)}};
    };
    std::vector<std::size_t> everything(records.size());
    for (std::size_t i = 0; i < everything.size(); ++i)
        everything[i] = i;
    json summary = dataset.examples.empty() ? json{{"response_count", 0}} : summarize(everything);
    json systems = json::object();
    if (!dataset.examples.empty())
        for (const auto &[system, idx] : by_system)
            systems[system] = summarize(idx);
    summary["systems"] = std::move(systems);

    sort_by_id(records);
    const auto format = report_format_for(cmd.report_format, cmd.output.out);
    write_report(records, cmd.output.out, format);

    Manifest manifest("score", argv);
    std::vector<std::string> baseline_names;
    for (auto m : metrics)
        baseline_names.emplace_back(baselines::to_string(m));
    manifest.body["config"] = {{"eval", to_json(config, cmd.eval.workers)},
                               {"backends", backend_config_json(cmd.backend, setup)},
                               {"format", cmd.format},
                               {"report_format", format == ReportFormat::csv ? "csv" : "jsonl"},
                               {"baselines", baseline_names},
                               {"seed", config.seed}};
    manifest.body["inputs"]["dataset"] = file_entry(cmd.dataset);
    manifest.body["transcript"] = finish_transcript(cmd.backend, setup);
    manifest.body["outputs"]["report"] = file_entry(cmd.output.out);
    print_summary(out, summary, manifest.emit(cmd.output));
    return kOk;
}

// ---------------------------------------------------------------------------
// metaeval

struct MetaevalCommand {
    std::string scores;
    std::string metric = "q2";
    double threshold = 0.5;
    std::string pr_out;
    double pr_step = 0.01;
    bool bootstrap = false;
    std::string bootstrap_out;
    int repeats = 1000;
    int sample_size = 350;
    std::string c_values = "0.05,0.1,0.15,0.2,0.25";
    std::uint64_t seed = 0;
    int workers = 1;
    OutputOptions output;
};

int run_metaeval(const MetaevalCommand &cmd, const std::vector<std::string> &argv, std::ostream &out) {
    const auto records = read_report(cmd.scores);
    json summary = {{"metric", cmd.metric}, {"records", records.size()}};
    Manifest manifest("metaeval", argv);

    // Threshold classification and PR curve over labelled records.
    std::vector<double> scores;
    std::vector<Label> labels;
    for (const auto &r : records)
        if (r.gold_label) {
            scores.push_back(metric_value(r, cmd.metric));
            labels.push_back(*r.gold_label);
        }
    if (!scores.empty()) {
        const auto t = metaeval::classify_at_threshold(scores, labels, cmd.threshold);
        summary["classification"] = {
            {"threshold", t.threshold},
            {"accuracy", t.accuracy},
            {"labelled", scores.size()},
            {"consistent", class_metrics_json(t.consistent)},
            {"inconsistent", class_metrics_json(t.inconsistent)},
            {"confusion",
             {{"tp", t.confusion.tp}, {"fp", t.confusion.fp}, {"tn", t.confusion.tn}, {"fn", t.confusion.fn}}}};
    }
    if (!cmd.pr_out.empty()) {
        if (scores.empty())
            throw ValidationError("PR curve needs records with gold labels");
        if (!(cmd.pr_step > 0.0 && cmd.pr_step <= 1.0))
            throw PreconditionError("--pr-step must lie in (0,1]");
        const auto steps = static_cast<long>(std::llround(1.0 / cmd.pr_step));
        std::vector<double> grid;
        for (long k = 0; k <= steps; ++k)
            grid.push_back(static_cast<double>(k) / static_cast<double>(steps));
        write_text_file(cmd.pr_out, metaeval::pr_curve_csv(metaeval::pr_curve(scores, labels, grid)));
        manifest.body["outputs"]["pr_curve"] = file_entry(cmd.pr_out);
    }

    // Correlation with human ratings.
    std::vector<const ReportRecord *> rated;
    for (const auto &r : records)
        if (r.human_score)
            rated.push_back(&r);
    if (!rated.empty()) {
        std::vector<double> human;
        for (const auto *r : rated)
            human.push_back(*r->human_score);
        json corr = json::object();
        for (const auto &name : shared_metrics(rated)) {
            std::vector<double> values;
            for (const auto *r : rated)
                values.push_back(metric_value(*r, name));
            corr[name] = {{"spearman", optional_json(metaeval::spearman(values, human))},
                          {"pearson", optional_json(metaeval::pearson(values, human))},
                          {"n", values.size()}};
        }
        summary["correlations"] = std::move(corr);
    }

    metaeval::BootstrapConfig bc;
    if (cmd.bootstrap) {
        const auto pairs = metaeval::pair_by_context(records);
        if (pairs.empty())
            throw ValidationError("bootstrap needs records sharing a context_id with both labels");
        std::vector<const ReportRecord *> paired;
        for (const auto &[c, i] : pairs) {
            paired.push_back(&records[c]);
            paired.push_back(&records[i]);
        }
        std::vector<metaeval::SystemMetric> metrics;
        for (const auto &name : shared_metrics(paired)) {
            std::vector<std::pair<double, double>> table;
            for (const auto &[c, i] : pairs)
                table.emplace_back(metric_value(records[c], name), metric_value(records[i], name));
            metrics.push_back(metaeval::mean_metric(name, std::move(table)));
        }
        bc.c_values.clear();
        for (const auto &c : split_list(cmd.c_values)) {
            try {
                std::size_t used = 0;
                bc.c_values.push_back(std::stod(c, &used));
                if (used != c.size())
                    throw std::invalid_argument(c);
            } catch (const std::logic_error &) {
                throw PreconditionError("--c-values: not a number: " + c);
            }
        }
        bc.sample_size = cmd.sample_size;
        bc.repeats = cmd.repeats;
        bc.seed = cmd.seed;
        bc.workers = cmd.workers;
        const auto result = metaeval::bootstrap_system_eval(pairs.size(), metrics, bc);
        json boot = {{"contexts", pairs.size()}, {"metrics", json::object()}};
        for (const auto &m : result.metrics)
            boot["metrics"][m.name] = {{"avg_correlation", optional_json(m.avg_correlation)},
                                       {"ci_lower", m.avg_correlation ? json(m.ci_lower) : json(nullptr)},
                                       {"ci_upper", m.avg_correlation ? json(m.ci_upper) : json(nullptr)},
                                       {"defined_repeats", m.defined_repeats},
                                       {"undefined_repeats", m.undefined_repeats}};
        summary["bootstrap"] = std::move(boot);
        if (!cmd.bootstrap_out.empty()) {
            write_text_file(cmd.bootstrap_out, metaeval::bootstrap_csv(result));
            manifest.body["outputs"]["bootstrap"] = file_entry(cmd.bootstrap_out);
        }
    }

    if (!cmd.output.out.empty())
        write_text_file(cmd.output.out, summary.dump(2) + "\n");

    manifest.body["config"] = {{"metric", cmd.metric}, {"threshold", cmd.threshold}, {"pr_step", cmd.pr_step},
                               {"bootstrap", cmd.bootstrap}, {"seed", cmd.seed}};
    if (cmd.bootstrap)
        manifest.body["config"]["bootstrap_config"] = {{"c_values", bc.c_values},
                                                       {"sample_size", bc.sample_size},
                                                       {"repeats", bc.repeats},
                                                       {"workers", bc.workers}};
    manifest.body["inputs"]["scores"] = file_entry(cmd.scores);
    if (!cmd.output.out.empty())
        manifest.body["outputs"]["summary"] = file_entry(cmd.output.out);
    print_summary(out, summary, manifest.emit(cmd.output));
    return kOk;
}

// ---------------------------------------------------------------------------
// dnli

struct DnliCommand {
    std::string dataset;
    std::string report_format;
    EvalOptions eval;
    BackendOptions backend;
    OutputOptions output;
};

int run_dnli(const DnliCommand &cmd, const std::vector<std::string> &argv, std::ostream &out) {
    const auto dataset = load_dataset(cmd.dataset, SourceFormat::dnli);
    auto eval = cmd.eval;
    eval.mode = "dnli";
    const auto config = make_eval_config(eval);
    auto setup = build_backends(cmd.backend);
    const auto result = with_transcript_saved(cmd.backend, setup, [&] {
        return metaeval::dnli_evaluate(dataset, config, *setup.backends, cmd.eval.workers);
    });
    json summary = {{"accuracy", result.accuracy},
                    {"correct", result.correct},
                    {"total", result.total},
                    {"threshold", config.dnli_threshold}};

    Manifest manifest("dnli", argv);
    if (!cmd.output.out.empty()) {
        std::vector<ReportRecord> records;
        for (std::size_t i = 0; i < result.scores.size(); ++i)
            records.push_back(make_record(dataset.examples[i], result.scores[i]));
        sort_by_id(records);
        write_report(records, cmd.output.out, report_format_for(cmd.report_format, cmd.output.out));
        manifest.body["outputs"]["report"] = file_entry(cmd.output.out);
    }
    manifest.body["config"] = {{"eval", to_json(config, cmd.eval.workers)},
                               {"backends", backend_config_json(cmd.backend, setup)},
                               {"seed", config.seed}};
    manifest.body["inputs"]["dataset"] = file_entry(cmd.dataset);
    manifest.body["transcript"] = finish_transcript(cmd.backend, setup);
    print_summary(out, summary, manifest.emit(cmd.output));
    return kOk;
}

// ---------------------------------------------------------------------------
// probe

struct ProbeKnowledgeCommand {
    std::string dataset;
    std::string format = "generic_jsonl";
    std::string probe_mode = "cross";
    std::string report_format;
    EvalOptions eval;
    BackendOptions backend;
    OutputOptions output;
};

int run_probe_knowledge(const ProbeKnowledgeCommand &cmd, const std::vector<std::string> &argv, std::ostream &out) {
    const auto dataset = load_dataset(cmd.dataset, parse_source_format(cmd.format));
    const auto config = make_eval_config(cmd.eval);
    const auto mode = metaeval::parse_probe_mode(cmd.probe_mode);
    auto setup = build_backends(cmd.backend);
    const auto result = with_transcript_saved(cmd.backend, setup, [&] {
        return metaeval::random_knowledge_probe(dataset, mode, config.seed, config, *setup.backends,
                                                cmd.eval.workers);
    });
    const auto system = score_system(result.scores);
    json mapping = json::object();
    for (std::size_t i = 0; i < result.mapping.size(); ++i)
        mapping[dataset.examples[i].id] = dataset.examples[result.mapping[i]].id;
    json summary = {{"probe_mode", to_string(mode)},
                    {"q2", result.q2},
                    {"no_answer_rate", result.no_answer_rate},
                    {"response_count", system.response_count},
                    {"fallback_count", system.fallback_count},
                    {"question_count", system.question_count},
                    {"knowledge_source", std::move(mapping)}};

    Manifest manifest("probe random-knowledge", argv);
    if (!cmd.output.out.empty()) {
        auto probed = metaeval::apply_knowledge_mapping(dataset, result.mapping);
        std::vector<ReportRecord> records;
        for (std::size_t i = 0; i < result.scores.size(); ++i)
            records.push_back(make_record(probed.examples[i], result.scores[i]));
        sort_by_id(records);
        write_report(records, cmd.output.out, report_format_for(cmd.report_format, cmd.output.out));
        manifest.body["outputs"]["report"] = file_entry(cmd.output.out);
    }
    manifest.body["config"] = {{"eval", to_json(config, cmd.eval.workers)},
                               {"backends", backend_config_json(cmd.backend, setup)},
                               {"format", cmd.format},
                               {"probe_mode", to_string(mode)},
                               {"seed", config.seed}};
    manifest.body["inputs"]["dataset"] = file_entry(cmd.dataset);
    manifest.body["transcript"] = finish_transcript(cmd.backend, setup);
    print_summary(out, summary, manifest.emit(cmd.output));
    return kOk;
}

struct LengthStatsCommand {
    std::string dataset;
    std::string format = "generic_jsonl";
    OutputOptions output;
};

int run_length_stats(const LengthStatsCommand &cmd, const std::vector<std::string> &argv, std::ostream &out) {
    const auto dataset = load_dataset(cmd.dataset, parse_source_format(cmd.format));
    json summary = json::object();
    for (const auto &[label, s] : metaeval::length_stats(dataset))
        summary[std::string(to_string(label))] = {
            {"count", s.count}, {"avg_characters", s.avg_characters}, {"avg_tokens", s.avg_tokens}};
    if (!cmd.output.out.empty())
        write_text_file(cmd.output.out, summary.dump(2) + "\n");
    Manifest manifest("probe length-stats", argv);
    manifest.body["config"] = {{"format", cmd.format}};
    manifest.body["inputs"]["dataset"] = file_entry(cmd.dataset);
    if (!cmd.output.out.empty())
        manifest.body["outputs"]["summary"] = file_entry(cmd.output.out);
    print_summary(out, summary, manifest.emit(cmd.output));
    return kOk;
}

struct HistogramCommand {
    std::string scores;
    std::string metric = "q2";
    std::string label;
    int bins = 10;
    double lo = 0.0;
    double hi = 1.0;
    OutputOptions output;
};

int run_histogram(const HistogramCommand &cmd, const std::vector<std::string> &argv, std::ostream &out) {
    if (cmd.output.out.empty())
        throw PreconditionError("histogram needs --out");
    const auto records = read_report(cmd.scores);
    std::optional<Label> label;
    if (!cmd.label.empty())
        label = parse_label(cmd.label);
    std::vector<double> values;
    for (const auto &r : records)
        if (!label || r.gold_label == label)
            values.push_back(metric_value(r, cmd.metric));
    const auto bins = metaeval::histogram(values, cmd.bins, cmd.lo, cmd.hi);
    write_text_file(cmd.output.out, metaeval::histogram_csv(bins));

    Manifest manifest("probe histogram", argv);
    manifest.body["config"] = {{"metric", cmd.metric}, {"label", cmd.label.empty() ? json(nullptr) : json(cmd.label)},
                               {"bins", cmd.bins},     {"lo", cmd.lo},
                               {"hi", cmd.hi}};
    manifest.body["inputs"]["scores"] = file_entry(cmd.scores);
    manifest.body["outputs"]["histogram"] = file_entry(cmd.output.out);
    print_summary(out, {{"values", values.size()}, {"bins", bins.size()}}, manifest.emit(cmd.output));
    return kOk;
}

int exit_code_for(const std::exception &e) {
    if (dynamic_cast<const CacheMissError *>(&e))
        return kCacheMiss;
    if (dynamic_cast<const IoError *>(&e))
        return kIo;
    if (dynamic_cast<const ParseError *>(&e) || dynamic_cast<const SchemaError *>(&e) ||
        dynamic_cast<const ValidationError *>(&e))
        return kInput;
    if (dynamic_cast<const TransportError *>(&e) || dynamic_cast<const ProtocolError *>(&e))
        return kBackend;
    if (dynamic_cast<const PreconditionError *>(&e))
        return kPrecondition;
    return kOther;
}

} // namespace

int dispatch(const std::vector<std::string> &raw_args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Q2 factual-consistency evaluation for knowledge-grounded dialogue", "q2"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::string config_file; // consumed by expand_config

    ScoreCommand score;
    auto *score_app = app.add_subcommand("score", "Score a dataset with Q2 and optional baselines");
    score_app->add_option("--dataset", score.dataset, "Dataset JSONL")->required();
    score_app->add_option("--format", score.format, "Dataset format")->check(CLI::IsMember(kSourceFormats));
    score_app->add_option("--report-format", score.report_format, "jsonl or csv (default: from --out extension)")
        ->check(CLI::IsMember({"jsonl", "csv"}));
    score_app->add_option("--baselines", score.baselines, "Comma list of overlap,bleu,e2e,bertscore");
    score_app->add_option("--config", config_file, "INI/TOML file of defaults; flags override it");
    add_eval_options(*score_app, score.eval, true);
    add_backend_options(*score_app, score.backend);
    add_output_options(*score_app, score.output, "Report path");

    MetaevalCommand meta;
    auto *meta_app = app.add_subcommand("metaeval", "Classification, PR curve, correlations and bootstrap");
    meta_app->add_option("--scores", meta.scores, "Report JSONL from `score`")->required();
    meta_app->add_option("--metric", meta.metric, "q2 or a baseline name");
    meta_app->add_option("--threshold", meta.threshold, "Decision threshold");
    meta_app->add_option("--pr-out", meta.pr_out, "PR curve CSV");
    meta_app->add_option("--pr-step", meta.pr_step, "Threshold grid step");
    meta_app->add_flag("--bootstrap", meta.bootstrap, "Run the simulated-system bootstrap");
    meta_app->add_option("--bootstrap-out", meta.bootstrap_out, "Bootstrap CSV");
    meta_app->add_option("--repeats", meta.repeats, "Bootstrap repeats")->check(CLI::PositiveNumber);
    meta_app->add_option("--sample-size", meta.sample_size, "Responses per simulated system")
        ->check(CLI::PositiveNumber);
    meta_app->add_option("--c-values", meta.c_values, "Comma list of inconsistent fractions");
    meta_app->add_option("--seed", meta.seed, "Random seed");
    meta_app->add_option("--workers", meta.workers, "Worker threads")->check(CLI::PositiveNumber);
    meta_app->add_option("--config", config_file, "INI/TOML file of defaults; flags override it");
    add_output_options(*meta_app, meta.output, "Summary JSON path");

    DnliCommand dnli;
    auto *dnli_app = app.add_subcommand("dnli", "Accuracy on premise/hypothesis pairs");
    dnli_app->add_option("--dataset", dnli.dataset, "DNLI JSONL")->required();
    dnli_app->add_option("--report-format", dnli.report_format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    dnli_app->add_option("--config", config_file, "INI/TOML file of defaults; flags override it");
    add_eval_options(*dnli_app, dnli.eval, false);
    dnli_app->add_option("--threshold", dnli.eval.dnli_threshold, "Consistent iff score > threshold");
    add_backend_options(*dnli_app, dnli.backend);
    add_output_options(*dnli_app, dnli.output, "Per-pair report path");

    auto *probe_app = app.add_subcommand("probe", "Diagnostic probes");
    probe_app->require_subcommand(1);

    ProbeKnowledgeCommand rk;
    auto *rk_app = probe_app->add_subcommand("random-knowledge", "Score responses against another turn's knowledge");
    rk_app->add_option("--dataset", rk.dataset, "Dataset JSONL")->required();
    rk_app->add_option("--format", rk.format, "Dataset format")->check(CLI::IsMember(kSourceFormats));
    rk_app->add_option("--probe-mode", rk.probe_mode, "same or cross")
        ->check(CLI::IsMember({"same", "cross", "same-dialogue", "cross-dialogue", "same_dialogue", "cross_dialogue"}));
    rk_app->add_option("--report-format", rk.report_format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    rk_app->add_option("--config", config_file, "INI/TOML file of defaults; flags override it");
    add_eval_options(*rk_app, rk.eval, true);
    add_backend_options(*rk_app, rk.backend);
    add_output_options(*rk_app, rk.output, "Report of the probed scores");

    LengthStatsCommand ls;
    auto *ls_app = probe_app->add_subcommand("length-stats", "Mean response length per gold label");
    ls_app->add_option("--dataset", ls.dataset, "Dataset JSONL")->required();
    ls_app->add_option("--format", ls.format, "Dataset format")->check(CLI::IsMember(kSourceFormats));
    ls_app->add_option("--config", config_file, "INI/TOML file of defaults; flags override it");
    add_output_options(*ls_app, ls.output, "Summary JSON path");

    HistogramCommand hist;
    auto *hist_app = probe_app->add_subcommand("histogram", "Score histogram CSV");
    hist_app->add_option("--scores", hist.scores, "Report JSONL")->required();
    hist_app->add_option("--metric", hist.metric, "q2 or a baseline name");
    hist_app->add_option("--label", hist.label, "Only records with this gold label")
        ->check(CLI::IsMember({"consistent", "inconsistent"}));
    hist_app->add_option("--bins", hist.bins, "Bin count")->check(CLI::PositiveNumber);
    hist_app->add_option("--lo", hist.lo, "Lower edge");
    hist_app->add_option("--hi", hist.hi, "Upper edge");
    hist_app->add_option("--config", config_file, "INI/TOML file of defaults; flags override it");
    add_output_options(*hist_app, hist.output, "Histogram CSV path");

    try {
        auto args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::CallForHelp &) {
            out << app.help();
            return kOk;
        } catch (const CLI::ParseError &e) {
            if (e.get_exit_code() == 0) {
                out << app.help();
                return kOk;
            }
            err << "error: " << e.what() << '\n';
            err << "run with --help for usage\n";
            return kUsage;
        }

        if (score_app->parsed())
            return run_score(score, raw_args, out);
        if (meta_app->parsed())
            return run_metaeval(meta, raw_args, out);
        if (dnli_app->parsed())
            return run_dnli(dnli, raw_args, out);
        if (rk_app->parsed())
            return run_probe_knowledge(rk, raw_args, out);
        if (ls_app->parsed())
            return run_length_stats(ls, raw_args, out);
        if (hist_app->parsed())
            return run_histogram(hist, raw_args, out);
        err << "error: no command\n";
        return kUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

} // namespace q2::cli
