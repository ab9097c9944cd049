#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "autoresearch/codeblock_extractor.hpp"
#include "autoresearch/types.hpp"

namespace autoresearch {

enum class Phase { install, verify, verify_repaired };

std::string_view to_string(Phase phase);
std::optional<Phase> phase_from_string(std::string_view name);

/// Workspace file name each phase's script is written to.
std::string_view script_filename(Phase phase);

struct ExecutionResult {
    Phase phase = Phase::verify;
    int exit_code = 0;
    std::string stdout_text;
    std::string stderr_text;
    double duration_s = 0.0;
    bool timed_out = false;
    bool stdout_truncated = false;
    bool stderr_truncated = false;
    std::filesystem::path workspace;

    bool limit_exceeded() const { return stdout_truncated || stderr_truncated; }
    /// Nonzero exit, timeout, or a stream-cap breach.
    bool failed() const { return exit_code != 0 || timed_out || limit_exceeded(); }
};

nlohmann::json to_json(const ExecutionResult& result);
ExecutionResult execution_from_json(const nlohmann::json& doc);

std::set<std::string> default_env_allowlist();

struct ExecLimits {
    std::chrono::duration<double> timeout{300.0};
    std::size_t max_stream_bytes = 1 << 20;
    /// Parent environment variables copied into the child.
    std::set<std::string> env_allowlist = default_env_allowlist();
};

/// One script invocation handed to an executor.
struct ScriptRun {
    std::filesystem::path workspace;
    /// Script path relative to the workspace.
    std::string script;
    Phase phase = Phase::verify;
    std::vector<std::string> interpreter;
    ExecLimits limits;
    /// Complete child environment ("NAME=value").
    std::vector<std::string> env;
    bool deny_network = false;
};

class WorkspaceError : public Error {
public:
    using Error::Error;
};

class SupervisorProtocolError : public Error {
public:
    using Error::Error;
};

class ScriptExecutor {
public:
    virtual ~ScriptExecutor() = default;
    virtual ExecutionResult execute(const ScriptRun& run) = 0;
};

/// Runs the interpreter directly under run_process with the same timeout,
/// stream-cap and kill-escalation semantics as the external supervisor.
class NativeExecutor : public ScriptExecutor {
public:
    explicit NativeExecutor(std::chrono::duration<double> kill_grace = std::chrono::seconds(5))
        : kill_grace_(kill_grace) {}

    ExecutionResult execute(const ScriptRun& run) override;

private:
    std::chrono::duration<double> kill_grace_;
};

struct SupervisorReport {
    int exit_code = 0;
    bool timed_out = false;
    double duration_s = 0.0;
    std::string stdout_bytes;
    std::string stderr_bytes;
};

/// Parses the JSON envelope on the last non-empty line of supervisor output.
/// Throws SupervisorProtocolError when it is missing or malformed.
SupervisorReport parse_supervisor_report(std::string_view supervisor_stdout);

std::string base64_decode(std::string_view text);

/// Invokes `<interpreter> <supervisor> <script> --timeout <secs> --max-bytes <n>`
/// and converts the report. A protocol violation becomes exit_code -1 with
/// the diagnostic in stderr_text.
class SupervisorExecutor : public ScriptExecutor {
public:
    explicit SupervisorExecutor(std::filesystem::path supervisor) : supervisor_(std::move(supervisor)) {}

    ExecutionResult execute(const ScriptRun& run) override;

private:
    std::filesystem::path supervisor_;
};

struct SandboxOptions {
    std::vector<std::string> interpreter{"python3"};
    /// Parent directory for per-trial workspaces.
    std::filesystem::path root;
    /// Create a fresh virtual environment in the workspace.
    bool isolated_env = true;
    bool allow_network = true;
    /// Variable name the API key is exported under inside the sandbox.
    std::string api_key_env = "OPENAI_API_KEY";
    /// Extra variables set for every script (e.g. PYTHONPATH).
    std::map<std::string, std::string> extra_env;
    bool keep_workspace = false;
    std::chrono::duration<double> env_setup_timeout{600.0};
};

std::filesystem::path default_sandbox_root();

/// One trial's isolated workspace. Owns the directory and removes it on
/// destruction unless keep_workspace is set.
class Sandbox {
public:
    Sandbox(SandboxOptions options, std::shared_ptr<ScriptExecutor> executor,
            const std::string& workspace_name, std::string api_key);
    ~Sandbox();
    Sandbox(const Sandbox&) = delete;
    Sandbox& operator=(const Sandbox&) = delete;

    const std::filesystem::path& workspace() const { return workspace_; }

    /// Creates the workspace and (when isolated) its virtual environment.
    void prepare();

    /// Install first; verify only when install succeeded. Results in phase order.
    std::vector<ExecutionResult> run_install_then_verify(const GeneratedScript& install,
                                                         const GeneratedScript& verify,
                                                         const ExecLimits& limits);

    /// Writes script into the workspace under the phase's file name and runs it.
    ExecutionResult execute(const GeneratedScript& script, Phase phase, const ExecLimits& limits);

    /// Child environment for a run: allowlisted parent variables, the API key
    /// under api_key_env, extra_env, and the venv activation variables.
    std::vector<std::string> child_environment(const ExecLimits& limits) const;

    /// Copies files the scripts produced into dest, redacting the API key.
    /// Returns paths relative to dest, sorted.
    std::vector<std::filesystem::path> harvest(const std::filesystem::path& dest) const;

private:
    std::vector<std::string> interpreter() const;

    SandboxOptions options_;
    std::shared_ptr<ScriptExecutor> executor_;
    std::filesystem::path workspace_;
    std::string api_key_;
    bool prepared_ = false;
};

} // namespace autoresearch
