#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "autoresearch/types.hpp"

namespace autoresearch {

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class ExecutorKind { native, supervisor };

/// Settings for a pipeline run. Parsed from a key=value file; relative paths
/// are resolved against the file's directory. The API key never comes from
/// the file.
struct PipelineConfig {
    std::string model = "gpt-4";
    std::string api_base_url = "https://api.openai.com";
    std::string api_path = "/v1/chat/completions";
    std::optional<int> max_output_tokens;

    /// Empty means the built-in templates.
    std::filesystem::path templates_dir;
    std::filesystem::path outputs_dir = "outputs";
    /// Empty means the built-in problem statement.
    std::filesystem::path problem_path;

    std::vector<std::string> interpreter_cmd{"python3"};
    double exec_timeout_secs = 300.0;
    std::size_t max_stream_bytes = 1 << 20;
    bool repair_enabled = true;
    bool reform_includes_problem = false;

    ExecutorKind executor = ExecutorKind::native;
    std::filesystem::path supervisor_path;
    bool isolated_env = true;
    bool sandbox_network = true;
    std::filesystem::path sandbox_root;
    bool keep_workspace = false;
    std::string sandbox_api_key_env = "OPENAI_API_KEY";
    /// Prepended to PYTHONPATH inside the sandbox.
    std::vector<std::filesystem::path> sandbox_pythonpath;
    /// Added to the default environment allowlist.
    std::set<std::string> env_allowlist_extra;
    /// Added to the default UNKNOWN_API_SYMBOL denylist.
    std::vector<std::string> lint_denylist_extra;

    /// From AUTORESEARCH_API_KEY at load time.
    std::string api_key;
};

inline constexpr std::string_view kApiKeyEnv = "AUTORESEARCH_API_KEY";
inline constexpr std::string_view kConfigEnv = "AUTORESEARCH_CONFIG";

/// Parses key=value lines ('#' starts a comment line). Unknown keys and
/// malformed values throw ConfigError naming the line.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);

/// Reads and parses the file, then picks up the API key from the environment.
PipelineConfig load_config(const std::filesystem::path& path);

} // namespace autoresearch
