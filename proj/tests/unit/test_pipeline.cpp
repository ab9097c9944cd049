#include <gtest/gtest.h>

#include <json.hpp>

#include "autoresearch/pipeline.hpp"
#include "test_support.hpp"

using namespace autoresearch;
using namespace testing_support;

namespace {

const std::string kCode = "```python\nprint('ok')\n```\n";
const std::string kInstall = "```python\nimport subprocess\n```\n";
const std::string kRepaired = "```python\nprint('fixed')\n```\n";

std::vector<std::string> seven(const std::string& hypothesis = "Padding changes answers.") {
    return {"1. A\n2. B", hypothesis, "H: x > y", "1. measure\n2. compare", kCode, kCode, kInstall};
}

struct Harness {
    TempDir dir;
    PipelineConfig config;
    std::shared_ptr<FakeExecutor> exec;
    std::shared_ptr<std::vector<ChatRequest>> seen = std::make_shared<std::vector<ChatRequest>>();

    explicit Harness(std::vector<FakeExecutor::Outcome> outcomes) {
        config.outputs_dir = dir / "outputs";
        config.sandbox_root = dir / "sandbox";
        config.isolated_env = false;
        exec = std::make_shared<FakeExecutor>(std::move(outcomes));
    }

    PipelineEngine engine() { return PipelineEngine(config, default_templates(), exec); }

    TrialRecord run(std::vector<std::string> responses) {
        return engine().run_trial({"Does padding matter?", {}},
                                  std::make_unique<ScriptedBackend>(std::move(responses), seen), false, "t");
    }
};

ExecutionResult result_with(std::string out, std::string err, int code = 1) {
    ExecutionResult r;
    r.exit_code = code;
    r.stdout_text = std::move(out);
    r.stderr_text = std::move(err);
    return r;
}

} // namespace

TEST(Feasibility, KeywordProxy) {
    EXPECT_TRUE(hypothesis_feasible("Adding spaces changes the answer."));
    EXPECT_FALSE(hypothesis_feasible("We should fine-tune GPT on padded inputs."));
    EXPECT_FALSE(hypothesis_feasible("Training the model with noise helps."));
    EXPECT_FALSE(hypothesis_feasible("  \n"));
}

TEST(RepairMessage, StdoutThenStderrWithWorkspaceStripped) {
    ExecutionResult r = result_with("partial\n", "Traceback: /tmp/ws/verification_code.py line 3\n");
    r.workspace = "/tmp/ws";
    EXPECT_EQ(repair_error_message(r), "partial\nTraceback: verification_code.py line 3\n");
}

TEST(RepairMessage, EmptyOutputAndLimits) {
    EXPECT_EQ(repair_error_message(result_with("", "", 3)),
              "The script exited with code 3 without printing anything.\n");
    ExecutionResult t = result_with("", "x", 124);
    t.timed_out = true;
    EXPECT_NE(repair_error_message(t).find("time"), std::string::npos);
}

TEST(RepairMessage, TailIsBoundedAndUtf8Safe) {
    std::string big;
    for (int i = 0; i < 3000; ++i) big += "\xc3\xa9";  // 2-byte code point
    const std::string msg = repair_error_message(result_with(big, "END\n"));
    EXPECT_LE(msg.size(), kRepairMessageBytes);
    EXPECT_EQ(msg.substr(msg.size() - 4), "END\n");
    EXPECT_NE(static_cast<unsigned char>(msg[0]) & 0xC0, 0x80);  // not a continuation byte
}

TEST(Classify, FlagsFollowRecord) {
    TrialRecord rec;
    rec.stages = {{Stage::Selection, "Padding matters", ""}, {Stage::PlanDesign, "plan", ""}};
    rec.verify = GeneratedScript{"print(1)\n"};
    rec.install_execution = result_with("", "", 0);
    rec.executions = {result_with("", "", 0)};
    OutcomeFlags f = classify_outcome(rec, {});
    EXPECT_EQ(f, (OutcomeFlags{true, true, true, true, true, true}));

    std::vector<LintFinding> warn{{Rule::STAT_TEST_PREREQ, Severity::warning, 1, ""}};
    EXPECT_TRUE(classify_outcome(rec, warn).end_to_end);
    std::vector<LintFinding> err{{Rule::STUB_RETURN, Severity::error, 1, ""}};
    EXPECT_FALSE(classify_outcome(rec, err).code_lint_clean);
    EXPECT_FALSE(classify_outcome(rec, err).end_to_end);

    rec.executions.push_back(result_with("", "", 1));
    EXPECT_FALSE(classify_outcome(rec, {}).verify_executable);
}

TEST(Engine, HappyPathRunsSevenCallsAndPersists) {
    Harness h({{0}, {0, "done\n"}});
    TrialRecord rec = h.run(seven());
    EXPECT_EQ(rec.status, TrialStatus::completed);
    EXPECT_EQ(h.seen->size(), 7u);
    EXPECT_EQ(rec.executions.size(), 1u);
    EXPECT_EQ(rec.count_stage(Stage::Repair), 0u);
    EXPECT_TRUE(rec.outcome.end_to_end);
    for (const char* f : {"problem.txt", "hypothesis_candidates.txt", "hypothesis.txt",
                          "representation_of_hypothesis.txt", "verification_plan.txt", "verification_code_draft.py",
                          "verification_code.py", "package_install.py", "execution_install.json",
                          "execution_verify.json", "lint.json", "outcome.json", "trial.json"}) {
        EXPECT_TRUE(fs::exists(rec.trial_dir / f)) << f;
    }
    EXPECT_EQ(read_file(rec.trial_dir / "verification_code.py"), "print('ok')\n");
    for (const auto& req : *h.seen) {
        EXPECT_EQ(req.temperature, 0.0);
        ASSERT_EQ(req.messages.size(), 1u);
        EXPECT_EQ(req.messages[0].role, Role::user);
    }
}

TEST(Engine, PromptsChainStageOutputs) {
    Harness h({{0}, {0}});
    h.run(seven("SELECTED-HYPOTHESIS"));
    const auto& s = *h.seen;
    EXPECT_NE(s[1].messages[0].content.find("1. A\n2. B"), std::string::npos);
    EXPECT_NE(s[2].messages[0].content.find("SELECTED-HYPOTHESIS"), std::string::npos);
    EXPECT_EQ(s[2].messages[0].content.find("Does padding matter?"), std::string::npos);
    EXPECT_NE(s[3].messages[0].content.find("H: x > y"), std::string::npos);
    EXPECT_NE(s[4].messages[0].content.find("1. measure"), std::string::npos);
    EXPECT_NE(s[5].messages[0].content.find("print('ok')"), std::string::npos);
    EXPECT_NE(s[5].messages[0].content.find("DO NOT include api-key"), std::string::npos);
}

TEST(Engine, ReformCanIncludeProblem) {
    Harness h({{0}, {0}});
    h.config.reform_includes_problem = true;
    h.run(seven());
    EXPECT_NE((*h.seen)[2].messages[0].content.find("Does padding matter?"), std::string::npos);
}

TEST(Engine, RepairOnceThenStop) {
    Harness h({{0}, {1, "", "boom\n"}, {1, "", "boom again\n"}});
    auto responses = seven();
    responses.push_back(kRepaired);
    TrialRecord rec = h.run(responses);
    EXPECT_EQ(h.seen->size(), 8u);
    EXPECT_EQ(rec.executions.size(), 2u);
    EXPECT_EQ(rec.count_stage(Stage::Repair), 1u);
    EXPECT_EQ(rec.count_stage(Stage::Reexecution), 1u);
    EXPECT_FALSE(rec.outcome.verify_executable);
    EXPECT_NE(h.seen->back().messages[0].content.find("boom\n"), std::string::npos);
    EXPECT_EQ(read_file(rec.trial_dir / "verification_code_updated.py"), "print('fixed')\n");
    EXPECT_EQ(h.exec->runs.back().script, "verification_code_updated.py");
}

TEST(Engine, RepairSuccessCountsAsExecutable) {
    Harness h({{0}, {1, "", "err"}, {0}});
    auto responses = seven();
    responses.push_back(kRepaired);
    TrialRecord rec = h.run(responses);
    EXPECT_TRUE(rec.outcome.verify_executable);
    EXPECT_EQ(rec.final_verify_script()->source, "print('fixed')\n");
}

TEST(Engine, RepairDisabled) {
    Harness h({{0}, {1}});
    h.config.repair_enabled = false;
    TrialRecord rec = h.run(seven());
    EXPECT_EQ(h.seen->size(), 7u);
    EXPECT_EQ(rec.executions.size(), 1u);
}

TEST(Engine, InstallFailureSkipsVerifyAndRepair) {
    Harness h({{1, "", "pip failed"}});
    TrialRecord rec = h.run(seven());
    EXPECT_EQ(h.seen->size(), 7u);
    EXPECT_TRUE(rec.executions.empty());
    EXPECT_FALSE(rec.outcome.install_ok);
    EXPECT_FALSE(rec.outcome.verify_executable);
}

TEST(Engine, GatewayFailureIsStageFailureWithPartialRecord) {
    Harness h({});
    auto responses = seven();
    responses.resize(3);
    try {
        h.run(responses);
        FAIL();
    } catch (const StageFailure& e) {
        EXPECT_EQ(e.stage(), Stage::PlanDesign);
        EXPECT_TRUE(fs::exists(e.trial_dir() / "representation_of_hypothesis.txt"));
        const auto doc = nlohmann::json::parse(read_file(e.trial_dir() / "trial.json"));
        EXPECT_EQ(doc["status"], "failed");
        EXPECT_EQ(doc["failed_stage"], "PlanDesign");
        EXPECT_TRUE(fs::exists(e.trial_dir() / "outcome.json"));
    }
}

TEST(Engine, SecretLeakAbortsWithoutPersistingOutput) {
    Harness h({});
    h.config.api_key = "sk-SENTINEL-KEY";
    auto responses = seven();
    responses[4] = "```python\nopenai.api_key = 'sk-SENTINEL-KEY'\n```\n";
    try {
        h.run(responses);
        FAIL();
    } catch (const SecretLeak& e) {
        EXPECT_EQ(e.stage(), Stage::CodeGen);
        EXPECT_FALSE(fs::exists(e.trial_dir() / "verification_code_draft.py"));
        for (const auto& f : fs::recursive_directory_iterator(e.trial_dir())) {
            if (f.is_regular_file()) EXPECT_EQ(read_file(f.path()).find("SENTINEL"), std::string::npos) << f.path();
        }
        EXPECT_EQ(nlohmann::json::parse(read_file(e.trial_dir() / "trial.json"))["status"], "aborted");
    }
}

TEST(Engine, EmptyCodeIsStageFailure) {
    Harness h({});
    auto responses = seven();
    responses[4] = "```python\n\n```";
    EXPECT_THROW(h.run(responses), StageFailure);
}

TEST(Engine, StageHookCanStopTrial) {
    Harness h({});
    PipelineEngine engine = h.engine();
    std::vector<Stage> seen_stages;
    engine.set_stage_hook([&](Stage s) {
        seen_stages.push_back(s);
        if (s == Stage::Reformulation) throw std::runtime_error("crash");
    });
    EXPECT_THROW(engine.run_trial({"p", {}}, std::make_unique<ScriptedBackend>(seven()), false, "t"),
                 std::runtime_error);
    EXPECT_EQ(seen_stages, (std::vector<Stage>{Stage::Candidates, Stage::Selection, Stage::Reformulation}));
}

TEST(Engine, DuplicateTrialIdRejected) {
    Harness h({{0}, {0}});
    h.run(seven());
    EXPECT_THROW(h.run(seven()), AlreadyExists);
}
