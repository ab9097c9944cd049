#include "python_lexer.hpp"

namespace autoresearch::detail {

std::vector<LexedLine> lex_python(std::string_view source) {
    std::vector<LexedLine> lines;

    char quote = 0;      // active string quote char, 0 outside strings
    bool triple = false; // active string is triple-quoted

    std::size_t pos = 0;
    while (pos < source.size()) {
        std::size_t end = source.find('\n', pos);
        if (end == std::string_view::npos) end = source.size();
        LexedLine line;
        line.raw = source.substr(pos, end - pos);
        if (!line.raw.empty() && line.raw.back() == '\r') line.raw.remove_suffix(1);
        std::string_view raw = line.raw;

        std::size_t i = 0;
        while (i < raw.size()) {
            const char c = raw[i];
            if (quote != 0) {
                if (c == '\\' && i + 1 < raw.size()) {
                    line.code += "ss";
                    i += 2;
                    continue;
                }
                if (c == quote) {
                    if (!triple) {
                        line.code.push_back(c);
                        quote = 0;
                        ++i;
                        continue;
                    }
                    if (raw.substr(i, 3) == std::string(3, quote)) {
                        line.code.append(3, c);
                        quote = 0;
                        triple = false;
                        i += 3;
                        continue;
                    }
                }
                line.code.push_back('s');
                ++i;
                continue;
            }
            if (c == '#') {
                line.comment = raw.substr(i);
                line.has_comment = true;
                break;
            }
            if (c == '"' || c == '\'') {
                quote = c;
                if (raw.substr(i, 3) == std::string(3, c)) {
                    triple = true;
                    line.code.append(3, c);
                    i += 3;
                } else {
                    line.code.push_back(c);
                    ++i;
                }
                continue;
            }
            line.code.push_back(c);
            ++i;
        }
        // An unterminated single-quoted string ends at the line break.
        if (quote != 0 && !triple && !(raw.size() > 0 && raw.back() == '\\')) quote = 0;

        lines.push_back(std::move(line));
        pos = end + 1;
    }
    return lines;
}

} // namespace autoresearch::detail
