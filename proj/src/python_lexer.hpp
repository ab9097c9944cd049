#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace autoresearch::detail {

/// One physical source line after lexing.
struct LexedLine {
    std::string_view raw;
    /// raw with the comment removed and every string-literal character
    /// between the quotes replaced by 's'. Same length as raw minus comment.
    std::string code;
    /// Text of the '#' comment on this line, if any.
    std::string_view comment;
    bool has_comment = false;
};

/// Splits Python source into lines, tracking string literals (including
/// triple-quoted strings that span lines) so that '#' and brackets inside
/// strings are not mistaken for code.
std::vector<LexedLine> lex_python(std::string_view source);

} // namespace autoresearch::detail
