#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "autoresearch/artifact_store.hpp"
#include "test_support.hpp"

using namespace autoresearch;
using namespace testing_support;

namespace {

bool only_target(const fs::path& dir, const std::string& name) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename() != name) return false;
        ++n;
    }
    return n <= 1;
}

} // namespace

TEST(TrialId, Format) {
    const std::regex pattern(R"(\d{4}-\d{2}-\d{2}_\d{2}-\d{2}-\d{2}_[a-z0-9]{4})");
    for (int i = 0; i < 20; ++i) EXPECT_TRUE(std::regex_match(make_trial_id(), pattern));
}

TEST(StageFilename, Mapping) {
    EXPECT_EQ(stage_filename(Stage::Candidates), "hypothesis_candidates.txt");
    EXPECT_EQ(stage_filename(Stage::Selection), "hypothesis.txt");
    EXPECT_EQ(stage_filename(Stage::Reformulation), "representation_of_hypothesis.txt");
    EXPECT_EQ(stage_filename(Stage::PlanDesign), "verification_plan.txt");
    EXPECT_EQ(stage_filename(Stage::InstrFollow), "verification_code.py");
    EXPECT_EQ(stage_filename(Stage::PkgInstall), "package_install.py");
    EXPECT_EQ(stage_filename(Stage::Repair), "verification_code_updated.py");
    EXPECT_FALSE(stage_filename(Stage::Execution));
    EXPECT_FALSE(stage_filename(Stage::Reexecution));
}

TEST(WriteAtomic, WritesAndRefusesOverwrite) {
    TempDir dir;
    write_atomic(dir / "a.txt", "one");
    EXPECT_EQ(read_file(dir / "a.txt"), "one");
    EXPECT_THROW(write_atomic(dir / "a.txt", "two"), AlreadyExists);
    EXPECT_EQ(read_file(dir / "a.txt"), "one");
    EXPECT_TRUE(only_target(dir.path(), "a.txt"));
}

TEST(WriteAtomic, CrashBeforeCommitLeavesNothing) {
    TempDir dir;
    fs::path seen_temp;
    EXPECT_THROW(write_atomic(dir / "b.txt", "payload",
                              [&](const fs::path& temp) {
                                  seen_temp = temp;
                                  EXPECT_EQ(read_file(temp), "payload");
                                  throw std::runtime_error("simulated crash");
                              }),
                 std::runtime_error);
    EXPECT_FALSE(seen_temp.empty());
    EXPECT_FALSE(fs::exists(seen_temp));
    EXPECT_FALSE(fs::exists(dir / "b.txt"));
    EXPECT_TRUE(fs::is_empty(dir.path()));
}

TEST(WriteAtomic, MissingDirectoryIsIoError) {
    TempDir dir;
    EXPECT_THROW(write_atomic(dir / "nope" / "x.txt", "y"), IoError);
}

TEST(RunDirectory, CreatePersistAndCollide) {
    TempDir root;
    RunDirectory run = RunDirectory::create(root.path(), "t1");
    EXPECT_EQ(run.trial_dir(), root / "t1");
    run.persist_stage(Stage::Selection, "H");
    EXPECT_EQ(read_file(root / "t1" / "hypothesis.txt"), "H");
    EXPECT_THROW(run.persist_stage(Stage::Selection, "again"), AlreadyExists);
    EXPECT_THROW(RunDirectory::create(root.path(), "t1"), AlreadyExists);

    ExecutionResult r;
    r.phase = Phase::verify;
    r.exit_code = 1;
    run.persist_execution(r);
    EXPECT_TRUE(fs::exists(root / "t1" / "execution_verify.json"));
    EXPECT_THROW(persist_stage(run.trial_dir(), Stage::Execution, "x"), IoError);
    EXPECT_THROW(persist_stage(root / "missing", Stage::Selection, "x"), IoError);
}

TEST(OutcomeJson, RoundTrip) {
    OutcomeFlags f{true, true, false, true, true, false};
    EXPECT_EQ(outcome_from_json(to_json(f)), f);
}

TEST(Aggregate, EmptyInputRejected) {
    EXPECT_THROW(aggregate(std::span<const OutcomeFlags>{}), EmptyInput);
}

// Independent tally over random flag vectors.
TEST(Aggregate, MatchesBruteForceCount) {
    std::mt19937 rng(7);
    for (int round = 0; round < 100; ++round) {
        std::vector<OutcomeFlags> v(1 + rng() % 60);
        std::size_t counts[5] = {0, 0, 0, 0, 0};
        for (auto& f : v) {
            f.hypothesis_feasible = rng() % 2;
            f.plan_present = true;
            f.code_lint_clean = rng() % 2;
            f.install_ok = rng() % 2;
            f.verify_executable = f.install_ok && rng() % 2;
            f.end_to_end = f.hypothesis_feasible && f.code_lint_clean && f.verify_executable;
            counts[0] += f.hypothesis_feasible;
            counts[1] += f.code_lint_clean;
            counts[2] += f.verify_executable;
            counts[3] += f.install_ok;
            counts[4] += f.end_to_end;
        }
        FunnelStats s = aggregate(v);
        EXPECT_EQ(s.trials, v.size());
        EXPECT_EQ(s.hypothesis_feasible, counts[0]);
        EXPECT_EQ(s.code_lint_clean, counts[1]);
        EXPECT_EQ(s.verify_executable, counts[2]);
        EXPECT_EQ(s.install_ok, counts[3]);
        EXPECT_EQ(s.end_to_end, counts[4]);
        EXPECT_DOUBLE_EQ(s.end_to_end_rate, static_cast<double>(counts[4]) / v.size());
    }
}

TEST(FlagDataset, PublishedFunnel) {
    const auto flags = load_flag_dataset(fixtures() / "paper_funnel.json");
    FunnelStats s = aggregate(flags);
    EXPECT_EQ(s.trials, 50u);
    EXPECT_EQ(s.hypothesis_feasible, 46u);
    EXPECT_EQ(s.code_lint_clean, 24u);
    EXPECT_EQ(s.verify_executable, 17u);
    EXPECT_EQ(s.install_ok, 13u);
    EXPECT_EQ(s.end_to_end, 13u);
    EXPECT_EQ(s.end_to_end_rate, 0.26);
}

TEST(FlagDataset, ArrayAndObjectForms) {
    TempDir dir;
    const std::string flags = to_json(OutcomeFlags{true}).dump();
    write_file(dir / "a.json", "[" + flags + "]");
    write_file(dir / "b.json", R"({"trials":[{"outcome":)" + flags + "}]}");
    write_file(dir / "c.json", R"([{"hypothesis_feasible":true}])");
    EXPECT_TRUE(load_flag_dataset(dir / "a.json")[0].hypothesis_feasible);
    EXPECT_TRUE(load_flag_dataset(dir / "b.json")[0].hypothesis_feasible);
    // Missing flags are an error rather than silently false.
    EXPECT_THROW(load_flag_dataset(dir / "c.json"), Error);
}

TEST(CollectOutcomes, SkipsDirsWithoutOutcome) {
    TempDir root;
    write_file(root / "b" / "outcome.json", to_json(OutcomeFlags{true}).dump());
    write_file(root / "a" / "outcome.json", to_json(OutcomeFlags{}).dump());
    fs::create_directories(root / "c");
    const auto v = collect_outcomes(root.path());
    ASSERT_EQ(v.size(), 2u);
    EXPECT_FALSE(v[0].hypothesis_feasible);
    EXPECT_TRUE(v[1].hypothesis_feasible);
}

TEST(FormatTable, ContainsCountsAndRate) {
    FunnelStats s{50, 46, 24, 17, 13, 13, 0.26};
    const std::string t = format_table(s);
    EXPECT_NE(t.find("gate"), std::string::npos);
    EXPECT_NE(t.find("0.260"), std::string::npos);
    EXPECT_NE(t.find("46"), std::string::npos);
}
