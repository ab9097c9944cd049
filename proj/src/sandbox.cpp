#include "autoresearch/sandbox.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "autoresearch/genlint.hpp"
#include "autoresearch/process.hpp"

namespace autoresearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kVenvDir = ".venv";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw WorkspaceError("cannot write " + path.string());
}

std::string format_seconds(double secs) {
    std::ostringstream s;
    s << secs;
    return s.str();
}

} // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
    case Phase::install: return "install";
    case Phase::verify: return "verify";
    case Phase::verify_repaired: return "verify_repaired";
    }
    return "verify";
}

std::optional<Phase> phase_from_string(std::string_view name) {
    if (name == "install") return Phase::install;
    if (name == "verify") return Phase::verify;
    if (name == "verify_repaired") return Phase::verify_repaired;
    return std::nullopt;
}

std::string_view script_filename(Phase phase) {
    switch (phase) {
    case Phase::install: return "package_install.py";
    case Phase::verify: return "verification_code.py";
    case Phase::verify_repaired: return "verification_code_updated.py";
    }
    return "script.py";
}

json to_json(const ExecutionResult& r) {
    return {
        {"phase", to_string(r.phase)},
        {"exit_code", r.exit_code},
        {"timed_out", r.timed_out},
        {"limit_exceeded", r.limit_exceeded()},
        {"duration_s", r.duration_s},
        {"stdout", r.stdout_text},
        {"stderr", r.stderr_text},
        {"stdout_truncated", r.stdout_truncated},
        {"stderr_truncated", r.stderr_truncated},
        {"workspace", r.workspace.string()},
    };
}

ExecutionResult execution_from_json(const json& doc) {
    ExecutionResult r;
    r.phase = phase_from_string(doc.at("phase").get<std::string>()).value_or(Phase::verify);
    r.exit_code = doc.at("exit_code").get<int>();
    r.timed_out = doc.value("timed_out", false);
    r.duration_s = doc.value("duration_s", 0.0);
    r.stdout_text = doc.value("stdout", std::string());
    r.stderr_text = doc.value("stderr", std::string());
    r.stdout_truncated = doc.value("stdout_truncated", false);
    r.stderr_truncated = doc.value("stderr_truncated", false);
    r.workspace = doc.value("workspace", std::string());
    return r;
}

std::set<std::string> default_env_allowlist() {
    return {"PATH",        "HOME",        "LANG",           "LC_ALL",       "LC_CTYPE",
            "TZ",          "TMPDIR",      "http_proxy",     "https_proxy",  "no_proxy",
            "HTTP_PROXY",  "HTTPS_PROXY", "NO_PROXY",       "PIP_INDEX_URL", "PIP_EXTRA_INDEX_URL",
            "PIP_TRUSTED_HOST", "SSL_CERT_FILE", "REQUESTS_CA_BUNDLE"};
}

ExecutionResult NativeExecutor::execute(const ScriptRun& run) {
    ProcessSpec spec;
    spec.argv = run.interpreter;
    spec.argv.push_back(run.script);
    spec.cwd = run.workspace;
    spec.env = run.env;
    spec.timeout = run.limits.timeout;
    spec.max_stream_bytes = run.limits.max_stream_bytes;
    spec.kill_grace = kill_grace_;
    spec.deny_network = run.deny_network;
    ProcessResult p = run_process(spec);

    ExecutionResult r;
    r.phase = run.phase;
    r.exit_code = p.exit_code;
    r.stdout_text = std::move(p.stdout_text);
    r.stderr_text = std::move(p.stderr_text);
    r.duration_s = p.duration_s;
    r.timed_out = p.timed_out;
    r.stdout_truncated = p.stdout_truncated;
    r.stderr_truncated = p.stderr_truncated;
    r.workspace = run.workspace;
    return r;
}

std::string base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ' && c != '\t') clean.push_back(c);
    }
    if (clean.empty()) return {};
    if (clean.size() % 4 != 0) throw SupervisorProtocolError("base64 length is not a multiple of 4");
    std::string out(clean.size() / 4 * 3, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) throw SupervisorProtocolError("invalid base64 payload");
    std::size_t padding = 0;
    if (clean.back() == '=') ++padding;
    if (clean.size() >= 2 && clean[clean.size() - 2] == '=') ++padding;
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

SupervisorReport parse_supervisor_report(std::string_view supervisor_stdout) {
    std::size_t end = supervisor_stdout.size();
    while (end > 0 && (supervisor_stdout[end - 1] == '\n' || supervisor_stdout[end - 1] == '\r')) --end;
    if (end == 0) throw SupervisorProtocolError("supervisor produced no report line");
    const std::size_t start = supervisor_stdout.rfind('\n', end - 1);
    const std::string_view line =
        supervisor_stdout.substr(start == std::string_view::npos ? 0 : start + 1,
                                 end - (start == std::string_view::npos ? 0 : start + 1));
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw SupervisorProtocolError(std::string("report line is not JSON: ") + e.what());
    }
    auto require = [&](const char* key, auto check, const char* type) {
        if (!doc.is_object() || !doc.contains(key) || !check(doc[key])) {
            throw SupervisorProtocolError(std::string("report field '") + key + "' missing or not " + type);
        }
    };
    require("exit_code", [](const json& j) { return j.is_number_integer(); }, "an integer");
    require("timed_out", [](const json& j) { return j.is_boolean(); }, "a boolean");
    require("duration_s", [](const json& j) { return j.is_number(); }, "a number");
    require("stdout_b64", [](const json& j) { return j.is_string(); }, "a string");
    require("stderr_b64", [](const json& j) { return j.is_string(); }, "a string");

    SupervisorReport report;
    report.exit_code = doc["exit_code"].get<int>();
    report.timed_out = doc["timed_out"].get<bool>();
    report.duration_s = doc["duration_s"].get<double>();
    report.stdout_bytes = base64_decode(doc["stdout_b64"].get<std::string>());
    report.stderr_bytes = base64_decode(doc["stderr_b64"].get<std::string>());
    return report;
}

ExecutionResult SupervisorExecutor::execute(const ScriptRun& run) {
    const double secs = run.limits.timeout.count();
    ProcessSpec spec;
    spec.argv = run.interpreter;
    spec.argv.push_back(fs::absolute(supervisor_).string());
    spec.argv.push_back(run.script);
    spec.argv.push_back("--timeout");
    spec.argv.push_back(format_seconds(secs));
    spec.argv.push_back("--max-bytes");
    spec.argv.push_back(std::to_string(run.limits.max_stream_bytes));
    spec.cwd = run.workspace;
    spec.env = run.env;
    // The supervisor enforces the real limits; these only guard against a hung supervisor.
    spec.timeout = std::chrono::duration<double>(secs + 15.0);
    spec.max_stream_bytes = (run.limits.max_stream_bytes / 3 + 2) * 8 + (1 << 16);
    spec.deny_network = run.deny_network;
    ProcessResult p = run_process(spec);

    ExecutionResult r;
    r.phase = run.phase;
    r.workspace = run.workspace;
    r.duration_s = p.duration_s;
    try {
        SupervisorReport report = parse_supervisor_report(p.stdout_text);
        r.exit_code = report.exit_code;
        r.timed_out = report.timed_out;
        r.duration_s = report.duration_s;
        r.stdout_truncated = report.stdout_bytes.size() >= run.limits.max_stream_bytes;
        r.stderr_truncated = report.stderr_bytes.size() >= run.limits.max_stream_bytes;
        r.stdout_text = std::move(report.stdout_bytes);
        r.stderr_text = std::move(report.stderr_bytes);
        if (r.timed_out && r.exit_code == 0) r.exit_code = 124;
    } catch (const SupervisorProtocolError& e) {
        r.exit_code = -1;
        r.timed_out = p.timed_out;
        r.stderr_text = std::string("supervisor protocol error: ") + e.what() +
                        "\nsupervisor exit code: " + std::to_string(p.exit_code) +
                        "\nsupervisor stderr:\n" + p.stderr_text.substr(0, 4096);
    }
    return r;
}

fs::path default_sandbox_root() {
    return fs::temp_directory_path() / "autoresearch-sandbox";
}

Sandbox::Sandbox(SandboxOptions options, std::shared_ptr<ScriptExecutor> executor,
                 const std::string& workspace_name, std::string api_key)
    : options_(std::move(options)), executor_(std::move(executor)), api_key_(std::move(api_key)) {
    if (!executor_) executor_ = std::make_shared<NativeExecutor>();
    if (options_.interpreter.empty()) throw WorkspaceError("no interpreter configured");
    if (options_.root.empty()) options_.root = default_sandbox_root();
    workspace_ = fs::absolute(options_.root / workspace_name);
}

Sandbox::~Sandbox() {
    if (prepared_ && !options_.keep_workspace) {
        std::error_code ec;
        fs::remove_all(workspace_, ec);
    }
}

void Sandbox::prepare() {
    if (prepared_) return;
    std::error_code ec;
    fs::create_directories(options_.root, ec);
    if (ec) throw WorkspaceError("cannot create sandbox root " + options_.root.string() + ": " + ec.message());
    if (!fs::create_directory(workspace_, ec) || ec) {
        throw WorkspaceError("cannot create workspace " + workspace_.string() +
                             (ec ? ": " + ec.message() : ": already exists"));
    }
    prepared_ = true;

    if (!options_.isolated_env) return;
    ProcessSpec spec;
    spec.argv = options_.interpreter;
    spec.argv.insert(spec.argv.end(), {"-m", "venv", std::string(kVenvDir)});
    spec.cwd = workspace_;
    spec.env = child_environment(ExecLimits{});
    spec.timeout = options_.env_setup_timeout;
    ProcessResult p = run_process(spec);
    if (p.exit_code != 0 || p.timed_out) {
        throw WorkspaceError("creating the virtual environment failed (exit " +
                             std::to_string(p.exit_code) + "): " + p.stderr_text.substr(0, 2000));
    }
}

std::vector<std::string> Sandbox::interpreter() const {
    if (options_.isolated_env) return {(workspace_ / kVenvDir / "bin" / "python").string()};
    return options_.interpreter;
}

std::vector<std::string> Sandbox::child_environment(const ExecLimits& limits) const {
    std::map<std::string, std::string> env;
    for (const auto& name : limits.env_allowlist) {
        if (const char* value = std::getenv(name.c_str())) env[name] = value;
    }
    env["PYTHONDONTWRITEBYTECODE"] = "1";
    env["PYTHONHASHSEED"] = "0";
    if (!api_key_.empty() && !options_.api_key_env.empty()) env[options_.api_key_env] = api_key_;
    for (const auto& [name, value] : options_.extra_env) env[name] = value;
    if (options_.isolated_env && prepared_) {
        const auto venv = workspace_ / kVenvDir;
        env["VIRTUAL_ENV"] = venv.string();
        const auto it = env.find("PATH");
        env["PATH"] = (venv / "bin").string() + (it != env.end() ? ":" + it->second : "");
    }
    std::vector<std::string> out;
    out.reserve(env.size());
    for (const auto& [name, value] : env) out.push_back(name + "=" + value);
    return out;
}

ExecutionResult Sandbox::execute(const GeneratedScript& script, Phase phase, const ExecLimits& limits) {
    if (!prepared_) prepare();
    const std::string name(script_filename(phase));
    write_file(workspace_ / name, script.source);

    ScriptRun run;
    run.workspace = workspace_;
    run.script = name;
    run.phase = phase;
    run.interpreter = interpreter();
    run.limits = limits;
    run.env = child_environment(limits);
    run.deny_network = !options_.allow_network;
    ExecutionResult result = executor_->execute(run);
    result.phase = phase;
    result.workspace = workspace_;

    const std::vector<std::string> secrets{api_key_};
    result.stdout_text = redact(std::move(result.stdout_text), secrets);
    result.stderr_text = redact(std::move(result.stderr_text), secrets);
    return result;
}

std::vector<ExecutionResult> Sandbox::run_install_then_verify(const GeneratedScript& install,
                                                              const GeneratedScript& verify,
                                                              const ExecLimits& limits) {
    std::vector<ExecutionResult> results;
    results.push_back(execute(install, Phase::install, limits));
    if (results.back().failed()) return results;
    results.push_back(execute(verify, Phase::verify, limits));
    return results;
}

std::vector<fs::path> Sandbox::harvest(const fs::path& dest) const {
    std::vector<fs::path> copied;
    if (!prepared_ || !fs::exists(workspace_)) return copied;
    const std::vector<std::string> secrets{api_key_};
    for (auto it = fs::recursive_directory_iterator(workspace_); it != fs::recursive_directory_iterator(); ++it) {
        const fs::path rel = fs::relative(it->path(), workspace_);
        const std::string first = rel.begin()->string();
        if (it->is_directory()) {
            if (first == kVenvDir || it->path().filename() == "__pycache__") it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        if (rel == script_filename(Phase::install) || rel == script_filename(Phase::verify) ||
            rel == script_filename(Phase::verify_repaired)) {
            continue;
        }
        const fs::path target = dest / rel;
        fs::create_directories(target.parent_path());
        write_file(target, redact(read_file(it->path()), secrets));
        copied.push_back(rel);
    }
    std::sort(copied.begin(), copied.end());
    return copied;
}

} // namespace autoresearch
