#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace autoresearch {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

std::string synopsis();

/// Entry point behind the autoresearch binary. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Every file under trial_dir (relative path -> bytes) with run-specific
/// noise removed: JSON keys produced_at and duration_s are dropped and the
/// trial id is replaced by "<trial-id>". Two replays of the same transcript
/// yield equal maps.
std::map<std::string, std::string> normalized_artifacts(const std::filesystem::path& trial_dir);

} // namespace autoresearch
