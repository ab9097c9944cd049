#include "autoresearch/artifact_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace autoresearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class TempFile {
public:
    explicit TempFile(const fs::path& target) {
        std::string pattern = (target.parent_path() / ("." + target.filename().string() + ".tmp-XXXXXX")).string();
        fd_ = ::mkstemp(pattern.data());
        if (fd_ < 0) {
            throw IoError("cannot create temp file for " + target.string() + ": " + std::strerror(errno));
        }
        path_ = pattern;
    }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    ~TempFile() {
        if (fd_ >= 0) ::close(fd_);
        ::unlink(path_.c_str());
    }

    void write_all(std::string_view content) {
        const char* p = content.data();
        std::size_t left = content.size();
        while (left > 0) {
            const ssize_t n = ::write(fd_, p, left);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw IoError("write failed for " + path_.string() + ": " + std::strerror(errno));
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
        ::fchmod(fd_, 0644);
        if (::fsync(fd_) != 0) throw IoError("fsync failed for " + path_.string());
        ::close(fd_);
        fd_ = -1;
    }

    const fs::path& path() const { return path_; }

private:
    int fd_ = -1;
    fs::path path_;
};

struct FlagField {
    const char* name;
    bool OutcomeFlags::*member;
};

constexpr FlagField kFlagFields[] = {
    {"hypothesis_feasible", &OutcomeFlags::hypothesis_feasible},
    {"plan_present", &OutcomeFlags::plan_present},
    {"code_lint_clean", &OutcomeFlags::code_lint_clean},
    {"verify_executable", &OutcomeFlags::verify_executable},
    {"install_ok", &OutcomeFlags::install_ok},
    {"end_to_end", &OutcomeFlags::end_to_end},
};

} // namespace

std::string make_trial_id(std::chrono::system_clock::time_point now) {
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    ::localtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%d_%H-%M-%S") << '_';

    static constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    thread_local std::mt19937 rng{std::random_device{}()};
    std::uniform_int_distribution<std::size_t> pick(0, kAlphabet.size() - 1);
    for (int i = 0; i < 4; ++i) out << kAlphabet[pick(rng)];
    return out.str();
}

std::optional<std::string_view> stage_filename(Stage stage) {
    switch (stage) {
    case Stage::Candidates: return "hypothesis_candidates.txt";
    case Stage::Selection: return "hypothesis.txt";
    case Stage::Reformulation: return "representation_of_hypothesis.txt";
    case Stage::PlanDesign: return "verification_plan.txt";
    case Stage::CodeGen: return "verification_code_draft.py";
    case Stage::InstrFollow: return "verification_code.py";
    case Stage::PkgInstall: return "package_install.py";
    case Stage::Repair: return "verification_code_updated.py";
    case Stage::Execution:
    case Stage::Reexecution: return std::nullopt;
    }
    return std::nullopt;
}

fs::path write_atomic(const fs::path& target, std::string_view content, const BeforeCommit& before_commit) {
    if (fs::exists(target)) throw AlreadyExists(target.string() + " already exists");
    TempFile temp(target);
    temp.write_all(content);
    if (before_commit) before_commit(temp.path());
    // link(2) fails with EEXIST instead of replacing, unlike rename(2).
    if (::link(temp.path().c_str(), target.c_str()) != 0) {
        if (errno == EEXIST) throw AlreadyExists(target.string() + " already exists");
        throw IoError("cannot commit " + target.string() + ": " + std::strerror(errno));
    }
    return target;
}

RunDirectory::RunDirectory(fs::path root, std::string trial_id)
    : root_(std::move(root)), trial_id_(std::move(trial_id)), trial_dir_(root_ / trial_id_) {}

RunDirectory RunDirectory::create(const fs::path& root, const std::string& trial_id) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create outputs directory " + root.string() + ": " + ec.message());
    RunDirectory dir(fs::absolute(root), trial_id);
    if (!fs::create_directory(dir.trial_dir_, ec)) {
        if (ec) throw IoError("cannot create " + dir.trial_dir_.string() + ": " + ec.message());
        throw AlreadyExists(dir.trial_dir_.string() + " already exists");
    }
    return dir;
}

fs::path RunDirectory::persist_stage(Stage stage, std::string_view content) const {
    return autoresearch::persist_stage(trial_dir_, stage, content);
}

fs::path RunDirectory::persist_execution(const ExecutionResult& result) const {
    json doc = to_json(result);
    return persist("execution_" + std::string(to_string(result.phase)) + ".json",
                   doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

fs::path RunDirectory::persist(std::string_view filename, std::string_view content) const {
    return write_atomic(trial_dir_ / filename, content);
}

fs::path persist_stage(const fs::path& trial_dir, Stage stage, std::string_view content) {
    const auto name = stage_filename(stage);
    if (!name) {
        throw IoError("stage " + std::string(to_string(stage)) + " is persisted as execution_<phase>.json");
    }
    if (!fs::is_directory(trial_dir)) throw IoError("trial directory " + trial_dir.string() + " does not exist");
    return write_atomic(trial_dir / *name, content);
}

json to_json(const OutcomeFlags& flags) {
    json doc = json::object();
    for (const auto& f : kFlagFields) doc[f.name] = flags.*f.member;
    return doc;
}

OutcomeFlags outcome_from_json(const json& doc) {
    if (!doc.is_object()) throw IoError("outcome flags must be a JSON object");
    OutcomeFlags flags;
    for (const auto& f : kFlagFields) {
        if (!doc.contains(f.name) || !doc[f.name].is_boolean()) {
            throw IoError(std::string("outcome flag '") + f.name + "' missing or not a boolean");
        }
        flags.*f.member = doc[f.name].get<bool>();
    }
    return flags;
}

FunnelStats aggregate(std::span<const OutcomeFlags> outcomes) {
    if (outcomes.empty()) throw EmptyInput("cannot aggregate an empty outcome list");
    FunnelStats s;
    s.trials = outcomes.size();
    for (const auto& o : outcomes) {
        s.hypothesis_feasible += o.hypothesis_feasible;
        s.code_lint_clean += o.code_lint_clean;
        s.verify_executable += o.verify_executable;
        s.install_ok += o.install_ok;
        s.end_to_end += o.end_to_end;
    }
    s.end_to_end_rate = static_cast<double>(s.end_to_end) / static_cast<double>(s.trials);
    return s;
}

json to_json(const FunnelStats& s) {
    return {
        {"trials", s.trials},
        {"hypothesis_feasible", s.hypothesis_feasible},
        {"code_lint_clean", s.code_lint_clean},
        {"verify_executable", s.verify_executable},
        {"install_ok", s.install_ok},
        {"end_to_end", s.end_to_end},
        {"end_to_end_rate", s.end_to_end_rate},
    };
}

std::string format_table(const FunnelStats& s) {
    const std::pair<const char*, std::size_t> rows[] = {
        {"trials", s.trials},
        {"hypothesis_feasible", s.hypothesis_feasible},
        {"code_lint_clean", s.code_lint_clean},
        {"verify_executable", s.verify_executable},
        {"install_ok", s.install_ok},
        {"end_to_end", s.end_to_end},
    };
    std::ostringstream out;
    out << std::left << std::setw(22) << "gate" << std::right << std::setw(7) << "count"
        << std::setw(9) << "rate" << '\n';
    for (const auto& [name, count] : rows) {
        const double rate = s.trials ? static_cast<double>(count) / static_cast<double>(s.trials) : 0.0;
        out << std::left << std::setw(22) << name << std::right << std::setw(7) << count
            << std::setw(9) << std::fixed << std::setprecision(3) << rate << '\n';
    }
    return out.str();
}

std::vector<OutcomeFlags> load_flag_dataset(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open flag dataset " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError("flag dataset " + path.string() + " is not valid JSON: " + e.what());
    }
    const json& list = doc.is_object() ? doc.at("trials") : doc;
    if (!list.is_array()) throw IoError("flag dataset " + path.string() + " has no trial array");
    std::vector<OutcomeFlags> out;
    out.reserve(list.size());
    for (const auto& item : list) out.push_back(outcome_from_json(item.contains("outcome") ? item["outcome"] : item));
    return out;
}

std::vector<OutcomeFlags> collect_outcomes(const fs::path& outputs_dir) {
    if (!fs::is_directory(outputs_dir)) throw IoError(outputs_dir.string() + " is not a directory");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(outputs_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "outcome.json")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<OutcomeFlags> out;
    for (const auto& dir : dirs) {
        std::ifstream in(dir / "outcome.json", std::ios::binary);
        try {
            out.push_back(outcome_from_json(json::parse(in)));
        } catch (const json::parse_error& e) {
            throw IoError((dir / "outcome.json").string() + ": " + e.what());
        }
    }
    return out;
}

} // namespace autoresearch
