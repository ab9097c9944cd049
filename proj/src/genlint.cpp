#include "autoresearch/genlint.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <set>
#include <utility>

#include "python_lexer.hpp"

namespace autoresearch {

namespace {

using detail::LexedLine;

constexpr std::array<std::pair<Rule, std::string_view>, 7> kRuleNames{{
    {Rule::ELLIPSIS_PLACEHOLDER, "ELLIPSIS_PLACEHOLDER"},
    {Rule::STUB_RETURN, "STUB_RETURN"},
    {Rule::COMMENT_ONLY_BLOCK, "COMMENT_ONLY_BLOCK"},
    {Rule::HARDCODED_API_KEY, "HARDCODED_API_KEY"},
    {Rule::SECRET_LEAK, "SECRET_LEAK"},
    {Rule::STAT_TEST_PREREQ, "STAT_TEST_PREREQ"},
    {Rule::UNKNOWN_API_SYMBOL, "UNKNOWN_API_SYMBOL"},
}};

// Checks whose presence near a t-test counts as a prerequisite check.
constexpr std::array<std::string_view, 8> kPrereqChecks{
    "shapiro", "normaltest", "levene", "bartlett", "anderson", "kstest", "fligner", "jarque_bera",
};
constexpr int kPrereqWindow = 25;

bool is_ident(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\f\v");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\f\v");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::size_t indent_of(std::string_view s) {
    std::size_t n = 0;
    while (n < s.size() && is_space(s[n])) ++n;
    return n;
}

std::string clip(std::string_view text) {
    text = trim(text);
    if (text.size() <= kMaxExcerpt) return std::string(text);
    std::size_t cut = kMaxExcerpt;
    // Do not split a UTF-8 sequence.
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

// The line without its comment; lexed code is 1:1 with raw up to the comment.
std::string_view code_part(const LexedLine& line) {
    return line.raw.substr(0, std::min(line.code.size(), line.raw.size()));
}

class Collector {
public:
    explicit Collector(std::span<const std::string> secrets) : secrets_(secrets) {}

    void add(Rule rule, int line, std::string_view text) {
        if (!seen_.emplace(line, rule).second) return;
        findings_.push_back({rule, severity_of(rule), line,
                             clip(redact(std::string(text), secrets_))});
    }

    std::vector<LintFinding> take() {
        std::stable_sort(findings_.begin(), findings_.end(), [](const auto& a, const auto& b) {
            return std::pair(a.line, static_cast<int>(a.rule)) <
                   std::pair(b.line, static_cast<int>(b.rule));
        });
        return std::move(findings_);
    }

private:
    std::span<const std::string> secrets_;
    std::set<std::pair<int, Rule>> seen_;
    std::vector<LintFinding> findings_;
};

struct OpenBracket {
    char ch;
    bool subscript;
    bool has_content = false;
    bool has_comment = false;
    int line;
};

// Single pass tracking brackets across lines: ellipsis used as a value and
// bracketed literals holding nothing but comments.
void check_brackets(const std::vector<LexedLine>& lines, Collector& out) {
    std::vector<OpenBracket> stack;
    char last_sig = 0;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string& code = lines[li].code;
        const int line_no = static_cast<int>(li) + 1;

        auto prev_sig = [&](std::size_t j) -> std::pair<char, std::size_t> {
            std::size_t k = j;
            while (k > 0) {
                --k;
                if (!is_space(code[k])) return {code[k], k};
            }
            return {stack.empty() ? char(0) : last_sig, std::string::npos};
        };
        auto mark_content = [&] {
            if (!stack.empty()) stack.back().has_content = true;
        };

        for (std::size_t j = 0; j < code.size(); ++j) {
            const char c = code[j];
            if (is_space(c)) continue;

            if (c == '(' || c == '[' || c == '{') {
                const auto [prev, at] = prev_sig(j);
                const bool subscript = c == '[' && at != std::string::npos &&
                                       (is_ident(prev) || prev == ')' || prev == ']' ||
                                        prev == '"' || prev == '\'');
                mark_content();
                stack.push_back({c, subscript, false, false, line_no});
                last_sig = c;
                continue;
            }
            if (c == ')' || c == ']' || c == '}') {
                if (!stack.empty()) {
                    const OpenBracket closed = stack.back();
                    stack.pop_back();
                    if (!closed.has_content && closed.has_comment) {
                        out.add(Rule::COMMENT_ONLY_BLOCK, closed.line, lines[closed.line - 1].raw);
                    }
                }
                mark_content();
                last_sig = c;
                continue;
            }
            if (c == '.' && code.compare(j, 3, "...") == 0) {
                const auto [prev, at] = prev_sig(j);
                bool value = false;
                if (prev == '=') {
                    const char before = (at != std::string::npos && at > 0) ? code[at - 1] : 0;
                    value = before != '=' && before != '!' && before != '<' && before != '>';
                } else if (at != std::string::npos && is_ident(prev)) {
                    std::size_t b = at + 1;
                    while (b > 0 && is_ident(code[b - 1])) --b;
                    const std::string_view word(code.data() + b, at + 1 - b);
                    value = word == "return" || word == "yield";
                } else if (!stack.empty() && !stack.back().subscript) {
                    value = prev == '(' || prev == '[' || prev == '{' || prev == ',' ||
                            (prev == ':' && stack.back().ch == '{');
                }
                if (value) out.add(Rule::ELLIPSIS_PLACEHOLDER, line_no, lines[li].raw);
                mark_content();
                last_sig = '.';
                j += 2;
                continue;
            }
            mark_content();
            last_sig = c;
        }
        if (lines[li].has_comment) {
            for (auto& open : stack) open.has_comment = true;
        }
    }
}

bool is_docstring(std::string_view code) {
    std::size_t i = 0;
    while (i < code.size() && std::isalpha(static_cast<unsigned char>(code[i]))) ++i;
    return i < code.size() && i <= 2 && (code[i] == '"' || code[i] == '\'');
}

bool returns_placeholder_literal(std::string_view statement) {
    static const std::regex kReturnLiteral(
        R"re(^return\s+[rRbBuUfF]{0,2}("""|'''|"|')(.*)\1$)re");
    std::cmatch m;
    const std::string text(trim(statement));
    if (!std::regex_match(text.c_str(), m, kReturnLiteral)) return false;
    return lower(m[2].str()).find("placeholder") != std::string::npos;
}

int bracket_delta(std::string_view code) {
    int depth = 0;
    for (char c : code) {
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
    }
    return depth;
}

// A function whose only statement returns a string literal mentioning
// "placeholder".
void check_stub_returns(const std::vector<LexedLine>& lines, Collector& out) {
    static const std::regex kDef(R"(^\s*(async\s+)?def\s+\w+)");
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (!std::regex_search(lines[li].code, kDef)) continue;
        const std::size_t def_indent = indent_of(lines[li].code);

        // Find the ':' that ends the signature.
        int depth = 0;
        std::size_t sig_line = li;
        std::size_t colon = std::string::npos;
        for (; sig_line < lines.size() && colon == std::string::npos; ++sig_line) {
            const std::string& code = lines[sig_line].code;
            for (std::size_t j = 0; j < code.size(); ++j) {
                const char c = code[j];
                if (c == '(' || c == '[' || c == '{') ++depth;
                else if (c == ')' || c == ']' || c == '}') --depth;
                else if (c == ':' && depth == 0) {
                    colon = j;
                    break;
                }
            }
        }
        if (colon == std::string::npos) continue;
        --sig_line;

        std::vector<std::size_t> statements;
        const std::string_view inline_body = trim(std::string_view(lines[sig_line].code).substr(colon + 1));
        if (!inline_body.empty()) {
            statements.push_back(sig_line);
        } else {
            std::size_t body_indent = 0;
            int open = 0;
            bool continued = false;
            for (std::size_t k = sig_line + 1; k < lines.size(); ++k) {
                const std::string_view code = lines[k].code;
                if (trim(code).empty()) continue;
                const std::size_t ind = indent_of(code);
                if (open == 0 && !continued) {
                    if (body_indent == 0) {
                        if (ind <= def_indent) break;
                        body_indent = ind;
                    }
                    if (ind < body_indent) break;
                    if (ind == body_indent) statements.push_back(k);
                }
                open += bracket_delta(code);
                if (open < 0) open = 0;
                continued = !trim(code).empty() && trim(code).back() == '\\';
            }
        }

        std::vector<std::size_t> real;
        for (std::size_t k : statements) {
            const std::string_view code =
                k == sig_line && !inline_body.empty() ? inline_body : trim(lines[k].code);
            if (!is_docstring(code) || code.substr(0, 6) == "return") real.push_back(k);
        }
        if (real.size() != 1) continue;
        const std::size_t k = real.front();
        std::string_view statement = code_part(lines[k]);
        if (k == sig_line && !inline_body.empty()) statement = statement.substr(colon + 1);
        if (returns_placeholder_literal(statement)) {
            out.add(Rule::STUB_RETURN, static_cast<int>(k) + 1, lines[k].raw);
        }
    }
}

void check_api_keys(const std::vector<LexedLine>& lines, Collector& out) {
    // name = "literal" / name: str = "literal" / f(api_key="literal")
    static const std::regex kNamed(
        R"re(([A-Za-z_][\w.]*)\s*(?::\s*[\w.\[\]]+\s*)?=\s*[rRbBuUfF]{0,2}(['"])(.+?)\2)re");
    // mapping["..api_key.."] = "literal"
    static const std::regex kSubscript(
        R"re(\[\s*(['"])([^'"]*)\1\s*\]\s*=\s*[rRbBuUfF]{0,2}(['"])(.+?)\3)re");
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string text(code_part(lines[li]));
        bool hit = false;
        for (auto it = std::sregex_iterator(text.begin(), text.end(), kNamed);
             it != std::sregex_iterator() && !hit; ++it) {
            const auto& m = *it;
            const std::size_t eq = static_cast<std::size_t>(m.position(0)) +
                                   m.str(0).find('=', m.str(1).size());
            if (eq + 1 < text.size() && text[eq + 1] == '=') continue;
            hit = lower(m.str(1)).find("api_key") != std::string::npos;
        }
        for (auto it = std::sregex_iterator(text.begin(), text.end(), kSubscript);
             it != std::sregex_iterator() && !hit; ++it) {
            const std::string key = lower((*it).str(2));
            hit = key.find("api_key") != std::string::npos || key.find("api-key") != std::string::npos;
        }
        if (hit) out.add(Rule::HARDCODED_API_KEY, static_cast<int>(li) + 1, lines[li].raw);
    }
}

void check_secrets(const std::vector<LexedLine>& lines, std::string_view source,
                   std::span<const std::string> secrets, Collector& out) {
    for (const auto& secret : secrets) {
        if (secret.empty()) continue;
        bool found_on_line = false;
        for (std::size_t li = 0; li < lines.size(); ++li) {
            if (lines[li].raw.find(secret) != std::string_view::npos) {
                out.add(Rule::SECRET_LEAK, static_cast<int>(li) + 1, lines[li].raw);
                found_on_line = true;
            }
        }
        if (!found_on_line && source.find(secret) != std::string_view::npos) {
            out.add(Rule::SECRET_LEAK, 1, "[REDACTED]");
        }
    }
}

void check_ttests(const std::vector<LexedLine>& lines, Collector& out) {
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string& code = lines[li].code;
        std::size_t at = code.find("ttest_ind(");
        if (at == std::string::npos || (at > 0 && is_ident(code[at - 1]))) continue;

        // Collect the call text up to its closing parenthesis.
        std::string call;
        int depth = 0;
        bool done = false;
        for (std::size_t k = li; k < lines.size() && !done; ++k) {
            const std::string& c = lines[k].code;
            for (std::size_t j = (k == li ? at : 0); j < c.size(); ++j) {
                call.push_back(c[j]);
                if (c[j] == '(') ++depth;
                if (c[j] == ')' && --depth == 0) {
                    done = true;
                    break;
                }
            }
        }
        if (call.find("alternative") != std::string::npos) continue;

        const std::size_t lo = li >= static_cast<std::size_t>(kPrereqWindow) ? li - kPrereqWindow : 0;
        const std::size_t hi = std::min(lines.size(), li + kPrereqWindow + 1);
        bool checked = false;
        for (std::size_t k = lo; k < hi && !checked; ++k) {
            for (auto name : kPrereqChecks) {
                if (lines[k].code.find(name) != std::string::npos) {
                    checked = true;
                    break;
                }
            }
        }
        if (!checked) out.add(Rule::STAT_TEST_PREREQ, static_cast<int>(li) + 1, lines[li].raw);
    }
}

void check_unknown_symbols(const std::vector<LexedLine>& lines,
                           std::span<const std::string> symbols, Collector& out) {
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string_view text = code_part(lines[li]);
        for (const auto& symbol : symbols) {
            if (!symbol.empty() && text.find(symbol) != std::string_view::npos) {
                out.add(Rule::UNKNOWN_API_SYMBOL, static_cast<int>(li) + 1, lines[li].raw);
                break;
            }
        }
    }
}

} // namespace

std::string_view to_string(Rule rule) {
    for (const auto& [value, name] : kRuleNames) {
        if (value == rule) return name;
    }
    return "UNKNOWN";
}

std::optional<Rule> rule_from_string(std::string_view name) {
    for (const auto& [value, text] : kRuleNames) {
        if (text == name) return value;
    }
    return std::nullopt;
}

std::string_view to_string(Severity severity) {
    switch (severity) {
    case Severity::error: return "error";
    case Severity::warning: return "warning";
    case Severity::info: return "info";
    }
    return "error";
}

Severity severity_of(Rule rule) {
    switch (rule) {
    case Rule::STAT_TEST_PREREQ: return Severity::warning;
    case Rule::UNKNOWN_API_SYMBOL: return Severity::info;
    default: return Severity::error;
    }
}

std::vector<std::string> default_unknown_symbols() {
    return {"openai.LanguageModel", "from openai import GPT3", "davinci-codex"};
}

std::string redact(std::string text, std::span<const std::string> secrets) {
    static constexpr std::string_view kMask = "[REDACTED]";
    for (const auto& secret : secrets) {
        if (secret.empty()) continue;
        std::size_t pos = 0;
        while ((pos = text.find(secret, pos)) != std::string::npos) {
            text.replace(pos, secret.size(), kMask);
            pos += kMask.size();
        }
    }
    return text;
}

std::vector<LintFinding> lint(std::string_view source, const LintOptions& options) {
    const auto lines = detail::lex_python(source);
    Collector out(options.secret_values);
    check_brackets(lines, out);
    check_stub_returns(lines, out);
    check_api_keys(lines, out);
    check_secrets(lines, source, options.secret_values, out);
    check_ttests(lines, out);
    check_unknown_symbols(lines, options.unknown_symbols, out);
    return out.take();
}

bool has_errors(std::span<const LintFinding> findings) {
    return std::any_of(findings.begin(), findings.end(),
                       [](const LintFinding& f) { return f.severity == Severity::error; });
}

std::string format_finding(std::string_view path, const LintFinding& finding) {
    std::string out(path);
    out += ':';
    out += std::to_string(finding.line);
    out += ": ";
    out += to_string(finding.severity);
    out += ' ';
    out += to_string(finding.rule);
    out += ": ";
    out += finding.excerpt;
    return out;
}

} // namespace autoresearch
