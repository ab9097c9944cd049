#include "autoresearch/types.hpp"

#include <array>
#include <utility>

namespace autoresearch {

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 10> kStageNames{{
    {Stage::Candidates, "Candidates"},
    {Stage::Selection, "Selection"},
    {Stage::Reformulation, "Reformulation"},
    {Stage::PlanDesign, "PlanDesign"},
    {Stage::CodeGen, "CodeGen"},
    {Stage::InstrFollow, "InstrFollow"},
    {Stage::PkgInstall, "PkgInstall"},
    {Stage::Execution, "Execution"},
    {Stage::Repair, "Repair"},
    {Stage::Reexecution, "Reexecution"},
}};

} // namespace

std::string_view to_string(Stage stage) {
    for (const auto& [value, name] : kStageNames) {
        if (value == stage) return name;
    }
    return "Unknown";
}

std::optional<Stage> stage_from_string(std::string_view name) {
    for (const auto& [value, text] : kStageNames) {
        if (text == name) return value;
    }
    return std::nullopt;
}

} // namespace autoresearch
