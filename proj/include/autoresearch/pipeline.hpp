#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoresearch/artifact_store.hpp"
#include "autoresearch/codeblock_extractor.hpp"
#include "autoresearch/config.hpp"
#include "autoresearch/genlint.hpp"
#include "autoresearch/llm_gateway.hpp"
#include "autoresearch/prompt_kit.hpp"
#include "autoresearch/sandbox.hpp"
#include "autoresearch/types.hpp"

namespace autoresearch {

struct ResearchProblem {
    std::string text;
    std::filesystem::path source_path;

    /// Throws Error when the file is unreadable or blank.
    static ResearchProblem from_file(const std::filesystem::path& path);
};

/// The built-in problem statement used when no problem file is configured.
ResearchProblem default_problem();

struct StageOutput {
    Stage stage = Stage::Candidates;
    std::string content;
    /// UTC, ISO 8601 with milliseconds.
    std::string produced_at;
};

enum class TrialStatus { completed, failed, aborted };

std::string_view to_string(TrialStatus status);

struct TrialRecord {
    std::string trial_id;
    ResearchProblem problem;
    std::vector<StageOutput> stages;

    /// CODE_GEN output before the instruction-following pass.
    std::optional<GeneratedScript> verify_draft;
    std::optional<GeneratedScript> verify;
    std::optional<GeneratedScript> verify_updated;
    std::optional<GeneratedScript> install;

    std::optional<ExecutionResult> install_execution;
    /// Verify-phase runs only: the first run and, after a repair, the re-run.
    std::vector<ExecutionResult> executions;

    /// Findings per persisted script file name.
    std::map<std::string, std::vector<LintFinding>> lint;
    OutcomeFlags outcome;

    TrialStatus status = TrialStatus::completed;
    std::string error;
    std::optional<Stage> failed_stage;

    std::filesystem::path trial_dir;

    const StageOutput* find_stage(Stage stage) const;
    std::size_t count_stage(Stage stage) const;
    /// The script that ran last in the verify phase (repaired if any).
    const GeneratedScript* final_verify_script() const;
};

nlohmann::json to_json(const GeneratedScript& script);
nlohmann::json to_json(const LintFinding& finding);
nlohmann::json to_json(const TrialRecord& record);

/// Errors that end a trial. The partial record has been persisted to
/// trial_dir by the time one is thrown.
class TrialError : public Error {
public:
    TrialError(const std::string& what, Stage stage, std::filesystem::path trial_dir);

    Stage stage() const { return stage_; }
    const std::filesystem::path& trial_dir() const { return trial_dir_; }

private:
    Stage stage_;
    std::filesystem::path trial_dir_;
};

/// A stage could not produce its output (gateway, template or extraction
/// error, or a sandbox failure).
class StageFailure : public TrialError {
public:
    StageFailure(Stage stage, std::string cause, std::filesystem::path trial_dir);

    const std::string& cause() const { return cause_; }

private:
    std::string cause_;
};

/// The configured API key showed up in generated output. The offending
/// output is not persisted.
class SecretLeak : public TrialError {
public:
    SecretLeak(Stage stage, std::filesystem::path trial_dir);
};

/// Keyword proxy: non-empty and not proposing to (re)train or fine-tune a model.
bool hypothesis_feasible(std::string_view hypothesis);

/// Flags for a finished or terminated trial. Only error-severity findings of
/// verify_lint count.
OutcomeFlags classify_outcome(const TrialRecord& record, std::span<const LintFinding> verify_lint);

/// Text handed to CODE_REPAIR: the tail of stdout followed by stderr (at most
/// 4000 bytes, cut on a UTF-8 boundary), with the workspace path replaced by
/// "." and a note when the run hit a limit.
std::string repair_error_message(const ExecutionResult& result);

inline constexpr std::size_t kRepairMessageBytes = 4000;

class PipelineEngine {
public:
    PipelineEngine(PipelineConfig config, TemplateSet templates,
                   std::shared_ptr<ScriptExecutor> executor = nullptr);

    /// Runs every stage for one trial in outputs_dir/<trial_id>. With record
    /// set, each (request, response) pair is appended to transcript.jsonl in
    /// the trial directory. An empty trial_id picks a fresh one.
    TrialRecord run_trial(const ResearchProblem& problem, std::unique_ptr<ChatBackend> backend,
                          bool record = false, const std::string& trial_id = {});

    /// Called after each stage's output is persisted; a throwing hook stops
    /// the trial at that boundary (used to simulate crashes).
    void set_stage_hook(std::function<void(Stage)> hook) { stage_hook_ = std::move(hook); }

    const PipelineConfig& config() const { return config_; }

private:
    PipelineConfig config_;
    TemplateSet templates_;
    std::shared_ptr<ScriptExecutor> executor_;
    std::function<void(Stage)> stage_hook_;
};

/// Templates from config.templates_dir, or the defaults when it is empty.
TemplateSet templates_for(const PipelineConfig& config);

/// The configured problem file, or the built-in problem.
ResearchProblem problem_for(const PipelineConfig& config);

/// Executor selected by config.executor.
std::shared_ptr<ScriptExecutor> executor_for(const PipelineConfig& config);

} // namespace autoresearch
