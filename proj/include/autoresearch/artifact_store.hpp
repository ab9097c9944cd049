#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "autoresearch/sandbox.hpp"
#include "autoresearch/types.hpp"

namespace autoresearch {

class AlreadyExists : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

/// "YYYY-MM-DD_HH-MM-SS_xxxx" in local time with a 4-char [a-z0-9] suffix.
std::string make_trial_id(std::chrono::system_clock::time_point now = std::chrono::system_clock::now());

/// File a stage's output is persisted to; nullopt for the execution stages,
/// which are stored as execution_<phase>.json.
std::optional<std::string_view> stage_filename(Stage stage);

/// Called with the temp file path after its content is fully written and
/// before it is committed under the target name.
using BeforeCommit = std::function<void(const std::filesystem::path& temp)>;

/// Writes content to a temp file in the target's directory and links it into
/// place. Never replaces an existing file (AlreadyExists). If anything throws
/// before the commit, the target does not exist and the temp file is removed.
std::filesystem::path write_atomic(const std::filesystem::path& target, std::string_view content,
                                   const BeforeCommit& before_commit = {});

/// outputs_dir/<trial_id>/ and the files inside it.
class RunDirectory {
public:
    /// Creates root/trial_id; AlreadyExists if it is already there.
    static RunDirectory create(const std::filesystem::path& root, const std::string& trial_id);

    const std::filesystem::path& root() const { return root_; }
    const std::filesystem::path& trial_dir() const { return trial_dir_; }
    const std::string& trial_id() const { return trial_id_; }
    std::filesystem::path artifacts_dir() const { return trial_dir_ / "artifacts"; }

    std::filesystem::path persist_stage(Stage stage, std::string_view content) const;
    std::filesystem::path persist_execution(const ExecutionResult& result) const;
    std::filesystem::path persist(std::string_view filename, std::string_view content) const;

private:
    RunDirectory(std::filesystem::path root, std::string trial_id);

    std::filesystem::path root_;
    std::string trial_id_;
    std::filesystem::path trial_dir_;
};

std::filesystem::path persist_stage(const std::filesystem::path& trial_dir, Stage stage,
                                    std::string_view content);

nlohmann::json to_json(const OutcomeFlags& flags);
OutcomeFlags outcome_from_json(const nlohmann::json& doc);

struct FunnelStats {
    std::size_t trials = 0;
    std::size_t hypothesis_feasible = 0;
    std::size_t code_lint_clean = 0;
    std::size_t verify_executable = 0;
    std::size_t install_ok = 0;
    std::size_t end_to_end = 0;
    double end_to_end_rate = 0.0;

    bool operator==(const FunnelStats&) const = default;
};

/// Counts each flag over the trials. EmptyInput for an empty list.
FunnelStats aggregate(std::span<const OutcomeFlags> outcomes);

nlohmann::json to_json(const FunnelStats& stats);
std::string format_table(const FunnelStats& stats);

/// Reads a flag dataset: either a JSON array of flag objects or an object
/// with a "trials" array.
std::vector<OutcomeFlags> load_flag_dataset(const std::filesystem::path& path);

/// outcome.json of every trial directory directly under outputs_dir, in
/// directory-name order. Trials without an outcome.json are skipped.
std::vector<OutcomeFlags> collect_outcomes(const std::filesystem::path& outputs_dir);

} // namespace autoresearch
