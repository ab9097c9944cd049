#include "autoresearch/codeblock_extractor.hpp"

namespace autoresearch {

namespace {

bool blank(std::string_view text) {
    return text.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// A fence line starts (after indentation) with at least three backticks.
// Returns the number of backticks, or 0 when the line is not a fence.
std::size_t fence_width(std::string_view line) {
    std::string_view t = trim(line);
    std::size_t n = 0;
    while (n < t.size() && t[n] == '`') ++n;
    return n >= 3 ? n : 0;
}

} // namespace

std::string_view to_string(Extraction extraction) {
    return extraction == Extraction::fenced ? "fenced" : "whole_text";
}

GeneratedScript extract(std::string_view model_output, Stage origin) {
    if (blank(model_output)) throw EmptyExtraction("model output is empty");

    GeneratedScript script;
    script.origin_stage = origin;

    std::vector<std::string> blocks;
    bool inside = false;
    std::size_t open_width = 0;
    std::string current;

    std::size_t pos = 0;
    while (pos <= model_output.size()) {
        std::size_t end = model_output.find('\n', pos);
        if (end == std::string_view::npos) end = model_output.size();
        std::string_view line = model_output.substr(pos, end - pos);
        const bool last_line = end == model_output.size();

        const std::size_t width = fence_width(line);
        if (!inside) {
            if (width > 0) {
                inside = true;
                open_width = width;
                current.clear();
                script.language_tags.emplace_back(trim(trim(line).substr(width)));
            }
        } else if (width >= open_width && trim(line).size() == width) {
            blocks.push_back(std::move(current));
            current.clear();
            inside = false;
        } else if (!(last_line && line.empty())) {
            current.append(line);
            current.push_back('\n');
        }

        if (last_line) break;
        pos = end + 1;
    }
    if (inside) blocks.push_back(std::move(current));

    if (blocks.empty()) {
        script.extraction = Extraction::whole_text;
        script.source = std::string(model_output);
        return script;
    }

    script.extraction = Extraction::fenced;
    script.block_count = static_cast<int>(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i > 0) script.source.push_back('\n');
        script.source += blocks[i];
    }
    if (blank(script.source)) throw EmptyExtraction("fenced blocks contain no code");
    return script;
}

} // namespace autoresearch
