#include <gtest/gtest.h>

#include <json.hpp>

#include "autoresearch/pipeline.hpp"
#include "test_support.hpp"

using namespace autoresearch;
using namespace testing_support;

namespace {

struct Crash {};

const std::vector<std::string> kResponses{
    "1. A", "Spaces change answers.", "R", "Plan", "```python\nprint(1)\n```",
    "```python\nimport sys\nsys.exit('first run fails')\n```", "```python\nprint('install')\n```",
    "```python\nprint('repaired')\n```"};

// Files present once each stage boundary has been crossed, in stage order.
const std::vector<std::pair<Stage, std::vector<std::string>>> kBoundaries{
    {Stage::Candidates, {"hypothesis_candidates.txt"}},
    {Stage::Selection, {"hypothesis.txt"}},
    {Stage::Reformulation, {"representation_of_hypothesis.txt"}},
    {Stage::PlanDesign, {"verification_plan.txt"}},
    {Stage::CodeGen, {"verification_code_draft.py"}},
    {Stage::InstrFollow, {"verification_code.py"}},
    {Stage::PkgInstall, {"package_install.py"}},
    {Stage::Execution, {"execution_install.json", "execution_verify.json"}},
    {Stage::Repair, {"verification_code_updated.py"}},
    {Stage::Reexecution, {"execution_verify_repaired.json"}},
};

std::set<std::string> listing(const fs::path& dir) {
    std::set<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
    return out;
}

} // namespace

// A crash right after each stage leaves exactly the files of the completed
// stages, each whole, and no temp files.
TEST(CrashAtStageBoundary, OnlyCompletedStagesPersisted) {
    for (std::size_t k = 0; k < kBoundaries.size(); ++k) {
        TempDir dir;
        PipelineConfig config;
        config.outputs_dir = dir / "outputs";
        config.sandbox_root = dir / "sandbox";
        config.isolated_env = false;
        PipelineEngine engine(config, default_templates());
        const Stage crash_at = kBoundaries[k].first;
        engine.set_stage_hook([&](Stage s) {
            if (s == crash_at) throw Crash{};
        });
        EXPECT_THROW(engine.run_trial({"Does padding matter?", {}}, std::make_unique<ScriptedBackend>(kResponses),
                                      false, "t"),
                     Crash)
            << to_string(crash_at);

        std::set<std::string> expected{"problem.txt"};
        for (std::size_t i = 0; i <= k; ++i) expected.insert(kBoundaries[i].second.begin(), kBoundaries[i].second.end());
        EXPECT_EQ(listing(dir / "outputs" / "t"), expected) << "crash after " << to_string(crash_at);
        EXPECT_EQ(read_file(dir / "outputs" / "t" / "hypothesis_candidates.txt"), "1. A");
        // The sandbox workspace is cleaned up on unwinding.
        EXPECT_TRUE(!fs::exists(dir / "sandbox" / "t"));
    }
}

TEST(CrashAtStageBoundary, RerunUnderNewIdSucceeds) {
    TempDir dir;
    PipelineConfig config;
    config.outputs_dir = dir / "outputs";
    config.sandbox_root = dir / "sandbox";
    config.isolated_env = false;
    PipelineEngine crashing(config, default_templates());
    crashing.set_stage_hook([](Stage s) {
        if (s == Stage::PlanDesign) throw Crash{};
    });
    EXPECT_THROW(crashing.run_trial({"p", {}}, std::make_unique<ScriptedBackend>(kResponses), false, "t"), Crash);
    // Restarting under the same id is refused; the partial record is left intact.
    PipelineEngine engine(config, default_templates());
    EXPECT_THROW(engine.run_trial({"p", {}}, std::make_unique<ScriptedBackend>(kResponses), false, "t"), AlreadyExists);
    TrialRecord rec = engine.run_trial({"p", {}}, std::make_unique<ScriptedBackend>(kResponses), false, "t2");
    EXPECT_EQ(rec.executions.size(), 2u);
    EXPECT_TRUE(rec.outcome.verify_executable);
}
