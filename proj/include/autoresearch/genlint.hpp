#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autoresearch/codeblock_extractor.hpp"

namespace autoresearch {

enum class Rule {
    ELLIPSIS_PLACEHOLDER,
    STUB_RETURN,
    COMMENT_ONLY_BLOCK,
    HARDCODED_API_KEY,
    SECRET_LEAK,
    STAT_TEST_PREREQ,
    UNKNOWN_API_SYMBOL,
};

enum class Severity { error, warning, info };

std::string_view to_string(Rule rule);
std::optional<Rule> rule_from_string(std::string_view name);
std::string_view to_string(Severity severity);
Severity severity_of(Rule rule);

struct LintFinding {
    Rule rule;
    Severity severity;
    int line = 0;         ///< 1-based
    std::string excerpt;  ///< at most kMaxExcerpt bytes; secrets redacted

    bool operator==(const LintFinding&) const = default;
};

inline constexpr std::size_t kMaxExcerpt = 120;

/// Symbols known not to exist in the APIs generated code tends to call.
std::vector<std::string> default_unknown_symbols();

struct LintOptions {
    std::vector<std::string> secret_values;
    std::vector<std::string> unknown_symbols = default_unknown_symbols();
};

/// Line-based detectors for placeholder code, hardcoded or leaked keys,
/// unchecked t-tests and nonexistent API symbols. Works on code that does
/// not parse. Findings are sorted by (line, rule).
std::vector<LintFinding> lint(std::string_view source, const LintOptions& options = {});

inline std::vector<LintFinding> lint(const GeneratedScript& script, const LintOptions& options = {}) {
    return lint(script.source, options);
}

bool has_errors(std::span<const LintFinding> findings);

/// "<path>:<line>: <severity> <rule>: <excerpt>"
std::string format_finding(std::string_view path, const LintFinding& finding);

/// Replaces every occurrence of each non-empty secret with "[REDACTED]".
std::string redact(std::string text, std::span<const std::string> secrets);

} // namespace autoresearch
