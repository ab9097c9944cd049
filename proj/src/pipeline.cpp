#include "autoresearch/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace autoresearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kDefaultProblem =
    R"(Research problem: answers padded with text nobody asked for

When a large language model answers a question, the reply often wraps the
answer itself in extra sentences that the question did not call for. Asked
"What is 1 + 1?", a model tends to reply "The answer is 2." where the whole
expected reply is "2".

Why it matters:
- Automatic evaluation usually compares a model's output with a reference
  answer. A correct answer surrounded by filler text fails an exact
  comparison, so measured accuracy understates what the model knows.
- Programs that consume model output must strip the filler with ad hoc
  parsing, which is brittle and differs from one task to the next.

The goal is to find ways to make the model return only the content that
answers the instruction, and to show by experiment that they work.
)";

// Phrases that propose acquiring or training a model rather than testing
// the hypothesis with what is available.
constexpr std::array<std::string_view, 8> kInfeasibleMarkers{
    "training the model", "train the model", "train a model",  "training a model",
    "fine-tun",           "finetun",         "retrain",        "re-train",
};

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    ::gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
    return out.str();
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    if (from.empty()) return;
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string utf8_tail(const std::string& text, std::size_t max_bytes) {
    if (text.size() <= max_bytes) return text;
    std::size_t start = text.size() - max_bytes;
    while (start < text.size() && (static_cast<unsigned char>(text[start]) & 0xC0) == 0x80) ++start;
    return text.substr(start);
}

std::string dump(const json& doc) {
    return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

json execution_summary(const ExecutionResult& r) {
    return {{"phase", to_string(r.phase)}, {"exit_code", r.exit_code}, {"timed_out", r.timed_out},
            {"limit_exceeded", r.limit_exceeded()}};
}

bool contains_secret(std::string_view text, std::span<const std::string> secrets) {
    return std::any_of(secrets.begin(), secrets.end(),
                       [&](const std::string& s) { return !s.empty() && text.find(s) != std::string_view::npos; });
}

// Everything one trial touches; keeps run_trial readable.
class TrialRun {
public:
    TrialRun(const PipelineConfig& config, const TemplateSet& templates, std::shared_ptr<ScriptExecutor> executor,
             const std::function<void(Stage)>& hook, RunDirectory dir, std::unique_ptr<ChatBackend> backend,
             bool record)
        : config_(config),
          templates_(templates),
          executor_(std::move(executor)),
          hook_(hook),
          dir_(std::move(dir)),
          gateway_(std::move(backend),
                   record ? std::make_shared<TranscriptWriter>(dir_.trial_dir() / "transcript.jsonl") : nullptr) {
        if (!config_.api_key.empty()) secrets_.push_back(config_.api_key);
        lint_options_.secret_values = secrets_;
        for (const auto& s : config_.lint_denylist_extra) lint_options_.unknown_symbols.push_back(s);
    }

    void run(TrialRecord& rec);
    void finalize(TrialRecord& rec, bool tolerate_existing);

private:
    std::string ask(Stage stage, TemplateId id, const SlotBindings& bindings, const std::string& preamble = {});
    GeneratedScript extract_script(Stage stage, const std::string& content);
    void guard(Stage stage, std::string_view text);
    void complete_stage(TrialRecord& rec, Stage stage, const std::string& content, std::string_view persisted);
    void record_execution(TrialRecord& rec, Stage stage, const std::vector<ExecutionResult>& results);
    SandboxOptions sandbox_options() const;
    ExecLimits limits() const;

    const PipelineConfig& config_;
    const TemplateSet& templates_;
    std::shared_ptr<ScriptExecutor> executor_;
    const std::function<void(Stage)>& hook_;
    RunDirectory dir_;
    LlmGateway gateway_;
    std::vector<std::string> secrets_;
    LintOptions lint_options_;
};

std::string TrialRun::ask(Stage stage, TemplateId id, const SlotBindings& bindings, const std::string& preamble) {
    std::string prompt;
    try {
        prompt = preamble + render(templates_.at(id), bindings);
    } catch (const Error& e) {
        throw StageFailure(stage, std::string(to_string(id)) + ": " + e.what(), dir_.trial_dir());
    }
    ChatRequest request;
    request.model = config_.model;
    request.messages.push_back({Role::user, std::move(prompt)});
    request.temperature = 0.0;
    request.max_output_tokens = config_.max_output_tokens;
    try {
        return gateway_.complete(request).content;
    } catch (const Error& e) {
        throw StageFailure(stage, e.what(), dir_.trial_dir());
    }
}

GeneratedScript TrialRun::extract_script(Stage stage, const std::string& content) {
    try {
        return extract(content, stage);
    } catch (const EmptyExtraction& e) {
        throw StageFailure(stage, e.what(), dir_.trial_dir());
    }
}

void TrialRun::guard(Stage stage, std::string_view text) {
    if (contains_secret(text, secrets_)) throw SecretLeak(stage, dir_.trial_dir());
}

void TrialRun::complete_stage(TrialRecord& rec, Stage stage, const std::string& content,
                              std::string_view persisted) {
    rec.stages.push_back({stage, content, now_iso8601()});
    dir_.persist_stage(stage, persisted);
    if (hook_) hook_(stage);
}

void TrialRun::record_execution(TrialRecord& rec, Stage stage, const std::vector<ExecutionResult>& results) {
    json summary = json::array();
    for (const auto& r : results) {
        if (r.phase == Phase::install) rec.install_execution = r;
        else rec.executions.push_back(r);
        dir_.persist_execution(r);
        summary.push_back(execution_summary(r));
    }
    rec.stages.push_back({stage, summary.dump(), now_iso8601()});
    if (hook_) hook_(stage);
}

SandboxOptions TrialRun::sandbox_options() const {
    SandboxOptions o;
    o.interpreter = config_.interpreter_cmd;
    o.root = config_.sandbox_root;
    o.isolated_env = config_.isolated_env;
    o.allow_network = config_.sandbox_network;
    o.api_key_env = config_.sandbox_api_key_env;
    o.keep_workspace = config_.keep_workspace;
    if (!config_.sandbox_pythonpath.empty()) {
        std::string joined;
        for (const auto& p : config_.sandbox_pythonpath) {
            if (!joined.empty()) joined += ':';
            joined += fs::absolute(p).string();
        }
        o.extra_env["PYTHONPATH"] = joined;
    }
    return o;
}

ExecLimits TrialRun::limits() const {
    ExecLimits l;
    l.timeout = std::chrono::duration<double>(config_.exec_timeout_secs);
    l.max_stream_bytes = config_.max_stream_bytes;
    l.env_allowlist.insert(config_.env_allowlist_extra.begin(), config_.env_allowlist_extra.end());
    return l;
}

void TrialRun::run(TrialRecord& rec) {
    const std::string& problem = rec.problem.text;

    const std::string candidates = ask(Stage::Candidates, TemplateId::HypCandidates, {{"problem", problem}});
    guard(Stage::Candidates, candidates);
    complete_stage(rec, Stage::Candidates, candidates, candidates);

    const std::string hypothesis =
        ask(Stage::Selection, TemplateId::HypSelect, {{"problem", problem}, {"hypotheses", candidates}});
    guard(Stage::Selection, hypothesis);
    complete_stage(rec, Stage::Selection, hypothesis, hypothesis);

    SlotBindings reform{{"hypothesis", hypothesis}};
    std::string preamble;
    if (config_.reform_includes_problem) {
        if (templates_.at(TemplateId::HypReform).required_slots().contains("problem")) {
            reform.emplace("problem", problem);
        } else {
            preamble = "Research problem:\n" + problem + "\n\n";
        }
    }
    const std::string representation = ask(Stage::Reformulation, TemplateId::HypReform, reform, preamble);
    guard(Stage::Reformulation, representation);
    complete_stage(rec, Stage::Reformulation, representation, representation);

    const std::string plan = ask(Stage::PlanDesign, TemplateId::PlanDesign,
                                 {{"problem", problem}, {"representation_of_hypothesis", representation}});
    guard(Stage::PlanDesign, plan);
    complete_stage(rec, Stage::PlanDesign, plan, plan);

    const std::string code = ask(Stage::CodeGen, TemplateId::CodeGen, {{"verification_plan", plan}});
    guard(Stage::CodeGen, code);
    GeneratedScript draft = extract_script(Stage::CodeGen, code);
    rec.verify_draft = draft;
    complete_stage(rec, Stage::CodeGen, code, draft.source);

    const std::string followed =
        ask(Stage::InstrFollow, TemplateId::InstrFollow, {{"verification_code", draft.source}});
    guard(Stage::InstrFollow, followed);
    GeneratedScript verify = extract_script(Stage::InstrFollow, followed);
    rec.verify = verify;
    complete_stage(rec, Stage::InstrFollow, followed, verify.source);

    const std::string install_text =
        ask(Stage::PkgInstall, TemplateId::PkgInstall, {{"verification_code", verify.source}});
    guard(Stage::PkgInstall, install_text);
    GeneratedScript install = extract_script(Stage::PkgInstall, install_text);
    rec.install = install;
    complete_stage(rec, Stage::PkgInstall, install_text, install.source);

    Sandbox sandbox(sandbox_options(), executor_, rec.trial_id, config_.api_key);
    const ExecLimits exec_limits = limits();
    std::vector<ExecutionResult> first;
    try {
        sandbox.prepare();
        first = sandbox.run_install_then_verify(install, verify, exec_limits);
    } catch (const Error& e) {
        throw StageFailure(Stage::Execution, e.what(), dir_.trial_dir());
    }
    record_execution(rec, Stage::Execution, first);

    // A single repair, driven by the first verify run's output only.
    if (config_.repair_enabled && !rec.executions.empty() && rec.executions.back().failed()) {
        const std::string repaired =
            ask(Stage::Repair, TemplateId::CodeRepair,
                {{"verification_code", verify.source}, {"error_message", repair_error_message(rec.executions.back())}});
        guard(Stage::Repair, repaired);
        GeneratedScript updated = extract_script(Stage::Repair, repaired);
        rec.verify_updated = updated;
        complete_stage(rec, Stage::Repair, repaired, updated.source);

        ExecutionResult second;
        try {
            second = sandbox.execute(updated, Phase::verify_repaired, exec_limits);
        } catch (const Error& e) {
            throw StageFailure(Stage::Reexecution, e.what(), dir_.trial_dir());
        }
        record_execution(rec, Stage::Reexecution, {second});
    }

    try {
        sandbox.harvest(dir_.artifacts_dir());
    } catch (const std::exception& e) {
        throw StageFailure(rec.verify_updated ? Stage::Reexecution : Stage::Execution,
                           std::string("collecting workspace files: ") + e.what(), dir_.trial_dir());
    }
}

void TrialRun::finalize(TrialRecord& rec, bool tolerate_existing) {
    const std::pair<const std::optional<GeneratedScript>*, Stage> scripts[] = {
        {&rec.verify_draft, Stage::CodeGen},
        {&rec.verify, Stage::InstrFollow},
        {&rec.install, Stage::PkgInstall},
        {&rec.verify_updated, Stage::Repair},
    };
    rec.lint.clear();
    for (const auto& [script, stage] : scripts) {
        if (*script) rec.lint[std::string(*stage_filename(stage))] = lint(**script, lint_options_);
    }
    std::vector<LintFinding> verify_lint;
    if (rec.verify_updated) verify_lint = rec.lint["verification_code_updated.py"];
    else if (rec.verify) verify_lint = rec.lint["verification_code.py"];
    rec.outcome = classify_outcome(rec, verify_lint);

    json lint_doc = json::object();
    for (const auto& [file, findings] : rec.lint) {
        json list = json::array();
        for (const auto& f : findings) list.push_back(to_json(f));
        lint_doc[file] = std::move(list);
    }
    const std::pair<const char*, std::string> files[] = {
        {"lint.json", dump(lint_doc)},
        {"outcome.json", dump(to_json(rec.outcome))},
        {"trial.json", dump(to_json(rec))},
    };
    for (const auto& [name, content] : files) {
        try {
            dir_.persist(name, content);
        } catch (const Error&) {
            if (!tolerate_existing) throw;
        }
    }
}

} // namespace

ResearchProblem ResearchProblem::from_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read problem file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    ResearchProblem p{buf.str(), path};
    if (is_blank(p.text)) throw Error("problem file " + path.string() + " is empty");
    return p;
}

ResearchProblem default_problem() {
    return {std::string(kDefaultProblem), {}};
}

std::string_view to_string(TrialStatus status) {
    switch (status) {
    case TrialStatus::completed: return "completed";
    case TrialStatus::failed: return "failed";
    case TrialStatus::aborted: return "aborted";
    }
    return "failed";
}

const StageOutput* TrialRecord::find_stage(Stage stage) const {
    for (const auto& s : stages) {
        if (s.stage == stage) return &s;
    }
    return nullptr;
}

std::size_t TrialRecord::count_stage(Stage stage) const {
    return static_cast<std::size_t>(
        std::count_if(stages.begin(), stages.end(), [&](const StageOutput& s) { return s.stage == stage; }));
}

const GeneratedScript* TrialRecord::final_verify_script() const {
    if (verify_updated) return &*verify_updated;
    if (verify) return &*verify;
    return nullptr;
}

json to_json(const GeneratedScript& s) {
    return {
        {"source", s.source},
        {"origin_stage", to_string(s.origin_stage)},
        {"extraction", to_string(s.extraction)},
        {"block_count", s.block_count},
        {"language_tags", s.language_tags},
    };
}

json to_json(const LintFinding& f) {
    return {{"rule", to_string(f.rule)}, {"severity", to_string(f.severity)}, {"line", f.line}, {"excerpt", f.excerpt}};
}

json to_json(const TrialRecord& r) {
    json stages = json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"stage", to_string(s.stage)}, {"content", s.content}, {"produced_at", s.produced_at}});
    }
    json scripts = json::object();
    auto put = [&](const char* name, const std::optional<GeneratedScript>& s) {
        scripts[name] = s ? to_json(*s) : json(nullptr);
    };
    put("verify_draft", r.verify_draft);
    put("verify", r.verify);
    put("verify_updated", r.verify_updated);
    put("install", r.install);

    json executions = json::array();
    for (const auto& e : r.executions) executions.push_back(to_json(e));
    json lint_doc = json::object();
    for (const auto& [file, findings] : r.lint) {
        json list = json::array();
        for (const auto& f : findings) list.push_back(to_json(f));
        lint_doc[file] = std::move(list);
    }
    return {
        {"trial_id", r.trial_id},
        {"status", to_string(r.status)},
        {"error", r.error.empty() ? json(nullptr) : json(r.error)},
        {"failed_stage", r.failed_stage ? json(to_string(*r.failed_stage)) : json(nullptr)},
        {"problem", {{"text", r.problem.text}, {"source_path", r.problem.source_path.string()}}},
        {"stages", std::move(stages)},
        {"scripts", std::move(scripts)},
        {"install_execution", r.install_execution ? to_json(*r.install_execution) : json(nullptr)},
        {"executions", std::move(executions)},
        {"lint", std::move(lint_doc)},
        {"outcome", to_json(r.outcome)},
    };
}

TrialError::TrialError(const std::string& what, Stage stage, fs::path trial_dir)
    : Error(what), stage_(stage), trial_dir_(std::move(trial_dir)) {}

StageFailure::StageFailure(Stage stage, std::string cause, fs::path trial_dir)
    : TrialError("stage " + std::string(to_string(stage)) + " failed: " + cause, stage, std::move(trial_dir)),
      cause_(std::move(cause)) {}

SecretLeak::SecretLeak(Stage stage, fs::path trial_dir)
    : TrialError("the API key appeared in the output of stage " + std::string(to_string(stage)) +
                     "; trial aborted before execution",
                 stage, std::move(trial_dir)) {}

bool hypothesis_feasible(std::string_view hypothesis) {
    if (is_blank(hypothesis)) return false;
    const std::string lower = lowercase(hypothesis);
    return std::none_of(kInfeasibleMarkers.begin(), kInfeasibleMarkers.end(),
                        [&](std::string_view m) { return lower.find(m) != std::string::npos; });
}

OutcomeFlags classify_outcome(const TrialRecord& record, std::span<const LintFinding> verify_lint) {
    OutcomeFlags f;
    const StageOutput* selection = record.find_stage(Stage::Selection);
    f.hypothesis_feasible = selection && hypothesis_feasible(selection->content);
    const StageOutput* plan = record.find_stage(Stage::PlanDesign);
    f.plan_present = plan && !is_blank(plan->content);
    f.code_lint_clean = record.final_verify_script() != nullptr && !has_errors(verify_lint);
    f.verify_executable = f.plan_present && !record.executions.empty() && !record.executions.back().failed();
    f.install_ok = record.install_execution && !record.install_execution->failed();
    f.end_to_end = f.hypothesis_feasible && f.plan_present && f.code_lint_clean && f.verify_executable && f.install_ok;
    return f;
}

std::string repair_error_message(const ExecutionResult& r) {
    std::string text = r.stdout_text + r.stderr_text;
    if (!r.workspace.empty()) {
        const std::string ws = r.workspace.string();
        replace_all(text, ws + "/", "");
        replace_all(text, ws, ".");
    }
    std::string notes;
    if (r.timed_out) notes += "\nThe script did not finish within the time limit and was terminated.\n";
    if (r.limit_exceeded()) notes += "\nThe script's output exceeded the capture limit and was cut off.\n";
    if (is_blank(text) && notes.empty()) {
        return "The script exited with code " + std::to_string(r.exit_code) + " without printing anything.\n";
    }
    return utf8_tail(text, kRepairMessageBytes - notes.size()) + notes;
}

PipelineEngine::PipelineEngine(PipelineConfig config, TemplateSet templates, std::shared_ptr<ScriptExecutor> executor)
    : config_(std::move(config)), templates_(std::move(templates)), executor_(std::move(executor)) {
    for (TemplateId id : kAllTemplateIds) {
        if (!templates_.contains(id)) throw TemplateError("template " + std::string(to_string(id)) + " missing");
    }
    if (!executor_) executor_ = executor_for(config_);
}

TrialRecord PipelineEngine::run_trial(const ResearchProblem& problem, std::unique_ptr<ChatBackend> backend,
                                      bool record, const std::string& trial_id) {
    if (is_blank(problem.text)) throw Error("research problem text is empty");
    std::optional<RunDirectory> created;
    if (!trial_id.empty()) {
        created = RunDirectory::create(config_.outputs_dir, trial_id);
    } else {
        // Ids only have second resolution; concurrent batches can collide.
        for (int attempt = 0; !created; ++attempt) {
            try {
                created = RunDirectory::create(config_.outputs_dir, make_trial_id());
            } catch (const AlreadyExists&) {
                if (attempt >= 20) throw;
            }
        }
    }
    RunDirectory dir = *created;

    TrialRecord rec;
    rec.trial_id = dir.trial_id();
    rec.problem = problem;
    rec.trial_dir = dir.trial_dir();
    dir.persist("problem.txt", problem.text);

    TrialRun run(config_, templates_, executor_, stage_hook_, dir, std::move(backend), record);
    try {
        run.run(rec);
    } catch (const TrialError& e) {
        rec.status = dynamic_cast<const SecretLeak*>(&e) ? TrialStatus::aborted : TrialStatus::failed;
        rec.error = e.what();
        rec.failed_stage = e.stage();
        run.finalize(rec, true);
        throw;
    }
    run.finalize(rec, false);
    return rec;
}

TemplateSet templates_for(const PipelineConfig& config) {
    return config.templates_dir.empty() ? default_templates() : load_templates(config.templates_dir);
}

ResearchProblem problem_for(const PipelineConfig& config) {
    return config.problem_path.empty() ? default_problem() : ResearchProblem::from_file(config.problem_path);
}

std::shared_ptr<ScriptExecutor> executor_for(const PipelineConfig& config) {
    if (config.executor == ExecutorKind::supervisor) {
        if (config.supervisor_path.empty()) throw ConfigError("executor=supervisor needs supervisor_path");
        return std::make_shared<SupervisorExecutor>(config.supervisor_path);
    }
    return std::make_shared<NativeExecutor>();
}

} // namespace autoresearch
