#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "autoresearch/types.hpp"

namespace autoresearch {

struct ProcessSpec {
    std::vector<std::string> argv;
    std::filesystem::path cwd;
    /// Complete child environment as "NAME=value" strings.
    std::vector<std::string> env;
    std::chrono::duration<double> timeout{300.0};
    std::size_t max_stream_bytes = 1 << 20;
    /// Time between SIGTERM and SIGKILL once the timeout fires.
    std::chrono::duration<double> kill_grace{5.0};
    /// Run the child in a fresh network namespace (no interfaces but lo).
    bool deny_network = false;
};

struct ProcessResult {
    /// Exit status; 128+N when killed by signal N; 124 for a timed-out child
    /// that still exited 0; 127 when exec failed.
    int exit_code = 0;
    int term_signal = 0;
    bool timed_out = false;
    std::string stdout_text;
    std::string stderr_text;
    bool stdout_truncated = false;
    bool stderr_truncated = false;
    double duration_s = 0.0;
};

class ProcessError : public Error {
public:
    using Error::Error;
};

/// Runs argv in its own process group with stdin from /dev/null, capturing
/// both streams up to max_stream_bytes each (excess is drained and dropped).
/// The whole group is killed on timeout and once the main child exits.
ProcessResult run_process(const ProcessSpec& spec);

/// Resolves a bare program name against a PATH value; returns it unchanged
/// when it contains a slash or nothing matches.
std::string resolve_program(const std::string& program, const std::string& path_value);

/// Current process environment as "NAME=value" strings.
std::vector<std::string> current_environment();

} // namespace autoresearch
