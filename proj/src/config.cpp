#include "autoresearch/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace autoresearch {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view value, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        std::size_t end = value.find(sep, start);
        if (end == std::string_view::npos) end = value.size();
        const auto item = trim(value.substr(start, end - start));
        if (!item.empty()) out.emplace_back(item);
        start = end + 1;
    }
    return out;
}

std::vector<std::string> split_words(std::string_view value) {
    std::istringstream in{std::string(value)};
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

bool parse_bool(std::string_view v, const std::string& where) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError(where + ": expected a boolean, got '" + std::string(v) + "'");
}

double parse_positive(std::string_view v, const std::string& where) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !(out > 0.0)) {
        throw ConfigError(where + ": expected a positive number, got '" + std::string(v) + "'");
    }
    return out;
}

long long parse_positive_int(std::string_view v, const std::string& where) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || out <= 0) {
        throw ConfigError(where + ": expected a positive integer, got '" + std::string(v) + "'");
    }
    return out;
}

fs::path resolve(std::string_view v, const fs::path& base) {
    fs::path p{std::string(v)};
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal();
}

} // namespace

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
    PipelineConfig c;
    using Setter = std::function<void(std::string_view, const std::string&)>;
    const std::map<std::string, Setter, std::less<>> setters{
        {"model", [&](auto v, auto&) { c.model = v; }},
        {"api_base_url", [&](auto v, auto&) { c.api_base_url = v; }},
        {"api_path", [&](auto v, auto&) { c.api_path = v; }},
        {"max_output_tokens",
         [&](auto v, auto& w) {
             if (v == "unlimited") c.max_output_tokens.reset();
             else c.max_output_tokens = static_cast<int>(parse_positive_int(v, w));
         }},
        {"templates_dir", [&](auto v, auto&) { c.templates_dir = resolve(v, base_dir); }},
        {"outputs_dir", [&](auto v, auto&) { c.outputs_dir = resolve(v, base_dir); }},
        {"problem_path", [&](auto v, auto&) { c.problem_path = resolve(v, base_dir); }},
        {"interpreter_cmd",
         [&](auto v, auto& w) {
             c.interpreter_cmd = split_words(v);
             if (c.interpreter_cmd.empty()) throw ConfigError(w + ": interpreter_cmd is empty");
         }},
        {"exec_timeout_secs", [&](auto v, auto& w) { c.exec_timeout_secs = parse_positive(v, w); }},
        {"max_stream_bytes",
         [&](auto v, auto& w) { c.max_stream_bytes = static_cast<std::size_t>(parse_positive_int(v, w)); }},
        {"repair_enabled", [&](auto v, auto& w) { c.repair_enabled = parse_bool(v, w); }},
        {"reform_includes_problem", [&](auto v, auto& w) { c.reform_includes_problem = parse_bool(v, w); }},
        {"executor",
         [&](auto v, auto& w) {
             if (v == "native") c.executor = ExecutorKind::native;
             else if (v == "supervisor") c.executor = ExecutorKind::supervisor;
             else throw ConfigError(w + ": executor must be native or supervisor");
         }},
        {"supervisor_path", [&](auto v, auto&) { c.supervisor_path = resolve(v, base_dir); }},
        {"isolated_env", [&](auto v, auto& w) { c.isolated_env = parse_bool(v, w); }},
        {"sandbox_network", [&](auto v, auto& w) { c.sandbox_network = parse_bool(v, w); }},
        {"sandbox_root", [&](auto v, auto&) { c.sandbox_root = resolve(v, base_dir); }},
        {"keep_workspace", [&](auto v, auto& w) { c.keep_workspace = parse_bool(v, w); }},
        {"sandbox_api_key_env", [&](auto v, auto&) { c.sandbox_api_key_env = v; }},
        {"sandbox_pythonpath",
         [&](auto v, auto&) {
             c.sandbox_pythonpath.clear();
             for (const auto& p : split_list(v, ':')) c.sandbox_pythonpath.push_back(resolve(p, base_dir));
         }},
        {"env_allowlist",
         [&](auto v, auto&) {
             for (auto& n : split_list(v, ',')) c.env_allowlist_extra.insert(std::move(n));
         }},
        {"lint_denylist",
         [&](auto v, auto&) {
             for (auto& s : split_list(v, ',')) c.lint_denylist_extra.push_back(std::move(s));
         }},
    };

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;

        const std::string where = "config line " + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "api_key" || key == "AUTORESEARCH_API_KEY") {
            throw ConfigError(where + ": the API key is read from " + std::string(kApiKeyEnv) +
                              " only, never from the config file");
        }
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
        it->second(value, where);
    }
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    PipelineConfig c = parse_config(buf.str(), fs::absolute(path).parent_path());
    if (const char* key = std::getenv(std::string(kApiKeyEnv).c_str())) c.api_key = key;
    return c;
}

} // namespace autoresearch
