#include "autoresearch/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "autoresearch/artifact_store.hpp"
#include "autoresearch/config.hpp"
#include "autoresearch/genlint.hpp"
#include "autoresearch/llm_gateway.hpp"
#include "autoresearch/pipeline.hpp"

namespace autoresearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void strip_keys(json& doc) {
    if (doc.is_object()) {
        doc.erase("produced_at");
        doc.erase("duration_s");
        for (auto& [key, value] : doc.items()) strip_keys(value);
    } else if (doc.is_array()) {
        for (auto& value : doc) strip_keys(value);
    }
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    if (from.empty()) return;
    for (std::size_t pos = 0; (pos = text.find(from, pos)) != std::string::npos; pos += to.size()) {
        text.replace(pos, from.size(), to);
    }
}

fs::path resolve_config_path(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(std::string(kConfigEnv).c_str()); env && *env) return env;
    return "autoresearch.conf";
}

PipelineConfig require_config(const std::string& flag) {
    const fs::path path = resolve_config_path(flag);
    if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
    try {
        return load_config(path);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
}

std::optional<BackendKind> parse_backend(const std::string& name) {
    auto kind = backend_kind_from_string(name);
    if (!kind) throw UsageError("unknown backend '" + name + "' (expected live or replay)");
    return kind;
}

std::unique_ptr<ChatBackend> make_backend(BackendKind kind, const PipelineConfig& config,
                                          const fs::path& transcript) {
    if (kind == BackendKind::replay) return std::make_unique<ReplayBackend>(load_transcript(transcript));
    WireConfig wire;
    wire.base_url = config.api_base_url;
    wire.path = config.api_path;
    wire.api_key = config.api_key;
    return std::make_unique<WireBackend>(wire);
}

void check_live_key(BackendKind kind, const PipelineConfig& config) {
    if (kind == BackendKind::live && config.api_key.empty()) {
        throw UsageError("the live backend needs " + std::string(kApiKeyEnv) + " in the environment");
    }
}

void print_funnel(std::ostream& out, const FunnelStats& stats) {
    out << to_json(stats).dump(2) << "\n\n" << format_table(stats);
}

struct TrialSummary {
    std::string trial_id;
    fs::path trial_dir;
    bool ok = false;
    std::string error;
    OutcomeFlags outcome;
};

TrialSummary run_one(PipelineEngine& engine, const ResearchProblem& problem, std::unique_ptr<ChatBackend> backend,
                     bool record) {
    TrialSummary s;
    try {
        TrialRecord rec = engine.run_trial(problem, std::move(backend), record);
        s.trial_id = rec.trial_id;
        s.trial_dir = rec.trial_dir;
        s.ok = true;
        s.outcome = rec.outcome;
    } catch (const TrialError& e) {
        s.trial_dir = e.trial_dir();
        s.trial_id = e.trial_dir().filename().string();
        s.error = e.what();
        const fs::path outcome = e.trial_dir() / "outcome.json";
        if (fs::exists(outcome)) s.outcome = outcome_from_json(json::parse(read_file(outcome)));
    }
    return s;
}

void print_trial(std::ostream& out, std::ostream& err, const TrialSummary& s) {
    if (s.ok) {
        out << "trial " << s.trial_id << " completed: " << s.trial_dir.string() << "\n"
            << to_json(s.outcome).dump() << "\n";
    } else {
        err << "trial " << s.trial_id << " failed: " << s.error << "\n";
        if (!s.trial_dir.empty()) err << "partial record in " << s.trial_dir.string() << "\n";
    }
}

std::vector<fs::path> fixture_transcripts(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw UsageError("fixtures directory not found: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw UsageError("no *.jsonl transcripts in " + dir.string());
    return out;
}

struct Options {
    std::string config;
    std::string backend = "live";
    std::string transcript;
    std::string problem;
    std::string outputs;
    std::string compare;
    std::string fixtures;
    std::string lint_file;
    std::string report_dir;
    std::string report_flags;
    int n = 0;
    int parallel = 1;
};

PipelineConfig config_with_overrides(const Options& o) {
    PipelineConfig config = require_config(o.config);
    if (!o.outputs.empty()) config.outputs_dir = o.outputs;
    if (!o.problem.empty()) config.problem_path = o.problem;
    return config;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
    PipelineConfig config = config_with_overrides(o);
    const BackendKind kind = *parse_backend(o.backend);
    if (kind == BackendKind::replay && o.transcript.empty()) throw UsageError("--backend replay needs --transcript");
    check_live_key(kind, config);
    PipelineEngine engine(config, templates_for(config));
    const TrialSummary s =
        run_one(engine, problem_for(config), make_backend(kind, config, o.transcript), kind == BackendKind::live);
    print_trial(out, err, s);
    return s.ok ? kExitOk : kExitFailure;
}

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
    PipelineConfig config = config_with_overrides(o);
    PipelineEngine engine(config, templates_for(config));
    const TrialSummary s =
        run_one(engine, problem_for(config), make_backend(BackendKind::replay, config, o.transcript), false);
    print_trial(out, err, s);
    if (!s.ok) return kExitFailure;
    if (o.compare.empty()) return kExitOk;

    if (!fs::is_directory(o.compare)) throw UsageError("--compare directory not found: " + o.compare);
    const auto expected = normalized_artifacts(o.compare);
    const auto actual = normalized_artifacts(s.trial_dir);
    int differences = 0;
    for (const auto& [file, bytes] : expected) {
        const auto it = actual.find(file);
        if (it == actual.end()) {
            err << "missing: " << file << "\n";
            ++differences;
        } else if (it->second != bytes) {
            err << "differs: " << file << "\n";
            ++differences;
        }
    }
    for (const auto& [file, bytes] : actual) {
        if (!expected.contains(file)) {
            err << "unexpected: " << file << "\n";
            ++differences;
        }
    }
    out << (differences == 0 ? "replay matches " : "replay differs from ") << o.compare << "\n";
    return differences == 0 ? kExitOk : kExitFailure;
}

int cmd_batch(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.n <= 0) throw UsageError("batch needs --n N with N >= 1");
    if (o.parallel <= 0) throw UsageError("--parallel must be >= 1");
    PipelineConfig config = config_with_overrides(o);
    const BackendKind kind = *parse_backend(o.backend);
    std::vector<fs::path> transcripts;
    if (kind == BackendKind::replay) {
        if (!o.fixtures.empty()) transcripts = fixture_transcripts(o.fixtures);
        else if (!o.transcript.empty()) transcripts.push_back(o.transcript);
        else throw UsageError("--backend replay needs --fixtures DIR or --transcript FILE");
        // Fail fast on a broken fixture set instead of midway through the batch.
        for (const auto& t : transcripts) load_transcript(t);
    }
    check_live_key(kind, config);

    PipelineEngine engine(config, templates_for(config));
    const ResearchProblem problem = problem_for(config);
    const std::size_t n = static_cast<std::size_t>(o.n);
    std::vector<TrialSummary> results(n);
    std::atomic<std::size_t> next{0};
    std::mutex print_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            std::unique_ptr<ChatBackend> backend;
            try {
                backend = make_backend(kind, config, kind == BackendKind::replay ? transcripts[i % transcripts.size()]
                                                                                 : fs::path());
                results[i] = run_one(engine, problem, std::move(backend), kind == BackendKind::live);
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
            std::lock_guard lock(print_mutex);
            print_trial(out, err, results[i]);
        }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(o.parallel), n);
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    std::vector<OutcomeFlags> outcomes;
    std::size_t failed = 0;
    for (const auto& r : results) {
        if (!r.ok) ++failed;
        if (r.ok || !r.trial_dir.empty()) outcomes.push_back(r.outcome);
    }
    out << "\n" << n << " trials, " << failed << " errored\n";
    if (!outcomes.empty()) print_funnel(out, aggregate(outcomes));
    return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_lint(const Options& o, std::ostream& out, std::ostream&) {
    const std::string source = read_file(o.lint_file);
    LintOptions options;
    if (const char* key = std::getenv(std::string(kApiKeyEnv).c_str()); key && *key) {
        options.secret_values.emplace_back(key);
    }
    const auto findings = lint(source, options);
    for (const auto& f : findings) out << format_finding(o.lint_file, f) << "\n";
    return has_errors(findings) ? kExitFailure : kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.report_dir.empty() == o.report_flags.empty()) throw UsageError("report needs exactly one of --dir or --flags");
    std::vector<OutcomeFlags> outcomes;
    try {
        outcomes = o.report_dir.empty() ? load_flag_dataset(o.report_flags) : collect_outcomes(o.report_dir);
        print_funnel(out, aggregate(outcomes));
    } catch (const EmptyInput& e) {
        err << "report: " << e.what() << "\n";
        return kExitFailure;
    } catch (const IoError& e) {
        throw UsageError(e.what());
    }
    return kExitOk;
}

} // namespace

std::string synopsis() {
    return "usage: autoresearch [--config FILE] <verb> [options]\n"
           "  run    [--backend live|replay] [--transcript FILE] [--problem FILE] [--outputs DIR]\n"
           "  batch  --n N [--parallel P] [--backend live|replay] [--fixtures DIR | --transcript FILE]\n"
           "         [--problem FILE] [--outputs DIR]\n"
           "  lint   FILE\n"
           "  report --dir DIR | --flags FILE\n"
           "  replay --transcript FILE [--compare TRIAL_DIR] [--problem FILE] [--outputs DIR]\n"
           "config: --config, else $AUTORESEARCH_CONFIG, else ./autoresearch.conf\n"
           "the API key is read from $AUTORESEARCH_API_KEY only\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"LLM-driven research pipeline orchestrator", "autoresearch"};
    app.set_help_flag();
    bool help = false;
    app.add_flag("-h,--help", help, "Show usage");
    app.add_option("--config", o.config, "Pipeline config file");
    app.require_subcommand(0, 1);
    app.fallthrough();

    auto add_trial_options = [&](CLI::App* sub) {
        sub->add_option("--problem", o.problem, "Research problem file");
        sub->add_option("--outputs", o.outputs, "Outputs directory");
    };
    CLI::App* run = app.add_subcommand("run", "Run one trial");
    run->add_option("--backend", o.backend, "live or replay");
    run->add_option("--transcript", o.transcript, "Replay transcript");
    add_trial_options(run);

    CLI::App* batch = app.add_subcommand("batch", "Run N trials");
    batch->add_option("--n", o.n, "Number of trials")->required();
    batch->add_option("--parallel", o.parallel, "Concurrent trials");
    batch->add_option("--backend", o.backend, "live or replay");
    batch->add_option("--fixtures", o.fixtures, "Directory of replay transcripts");
    batch->add_option("--transcript", o.transcript, "Single replay transcript for every trial");
    add_trial_options(batch);

    CLI::App* lint_cmd = app.add_subcommand("lint", "Lint a script");
    lint_cmd->add_option("file", o.lint_file, "Script to lint")->required();

    CLI::App* report = app.add_subcommand("report", "Aggregate outcomes into a funnel");
    report->add_option("--dir", o.report_dir, "Outputs directory of completed trials");
    report->add_option("--flags", o.report_flags, "Flag dataset (JSON)");

    CLI::App* replay = app.add_subcommand("replay", "Deterministic re-run from a transcript");
    replay->add_option("--transcript", o.transcript, "Replay transcript")->required();
    replay->add_option("--compare", o.compare, "Trial directory to compare against");
    add_trial_options(replay);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << synopsis();
        return kExitUsage;
    }
    if (help) {
        out << synopsis();
        return kExitOk;
    }

    try {
        if (run->parsed()) return cmd_run(o, out, err);
        if (batch->parsed()) return cmd_batch(o, out, err);
        if (lint_cmd->parsed()) return cmd_lint(o, out, err);
        if (report->parsed()) return cmd_report(o, out, err);
        if (replay->parsed()) return cmd_replay(o, out, err);
        err << "no verb given\n" << synopsis();
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << synopsis();
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n" << synopsis();
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

std::map<std::string, std::string> normalized_artifacts(const fs::path& trial_dir) {
    const std::string trial_id = fs::absolute(trial_dir).lexically_normal().filename().string();
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(trial_dir)) {
        if (!e.is_regular_file()) continue;
        std::string bytes = read_file(e.path());
        if (e.path().extension() == ".json") {
            json doc = json::parse(bytes, nullptr, false);
            if (!doc.is_discarded()) {
                strip_keys(doc);
                bytes = doc.dump(2, ' ', false, json::error_handler_t::replace);
            }
        }
        replace_all(bytes, trial_id, "<trial-id>");
        out[fs::relative(e.path(), trial_dir).generic_string()] = std::move(bytes);
    }
    return out;
}

} // namespace autoresearch
