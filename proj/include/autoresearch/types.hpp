#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace autoresearch {

/// Base for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pipeline stages in the order they run.
enum class Stage {
    Candidates,
    Selection,
    Reformulation,
    PlanDesign,
    CodeGen,
    InstrFollow,
    PkgInstall,
    Execution,
    Repair,
    Reexecution,
};

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view name);

/// Machine-checkable proxies for the per-trial evaluation items.
/// Invariants: end_to_end implies verify_executable and install_ok;
/// verify_executable implies plan_present.
struct OutcomeFlags {
    bool hypothesis_feasible = false;
    bool plan_present = false;
    bool code_lint_clean = false;
    bool verify_executable = false;
    bool install_ok = false;
    bool end_to_end = false;

    bool operator==(const OutcomeFlags&) const = default;
};

} // namespace autoresearch
