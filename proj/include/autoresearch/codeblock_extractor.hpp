#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "autoresearch/types.hpp"

namespace autoresearch {

enum class Extraction { fenced, whole_text };

std::string_view to_string(Extraction extraction);

/// Script text extracted from a model response.
struct GeneratedScript {
    std::string source;
    Stage origin_stage = Stage::CodeGen;
    Extraction extraction = Extraction::whole_text;
    int block_count = 0;
    /// Info strings of the fences in document order ("" when untagged).
    std::vector<std::string> language_tags;
};

class EmptyExtraction : public Error {
public:
    using Error::Error;
};

/// Concatenates every triple-backtick fenced block in document order, one
/// blank line between blocks. Each block keeps its lines verbatim and ends
/// with a newline. An unterminated fence runs to the end of the text.
/// Without any fence the whole output is the script.
///
/// Throws EmptyExtraction when the output (or every fenced block) is blank.
GeneratedScript extract(std::string_view model_output, Stage origin = Stage::CodeGen);

} // namespace autoresearch
