#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "autoresearch/cli.hpp"
#include "test_support.hpp"

using namespace autoresearch;
using namespace testing_support;

namespace {

struct Invocation {
    int code;
    std::string out;
    std::string err;
};

Invocation cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
    EXPECT_NE(cli({"--help"}).out.find("usage:"), std::string::npos);
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(cli({"batch"}).code, kExitUsage);
    EXPECT_EQ(cli({"report"}).code, kExitUsage);
    EXPECT_EQ(cli({"lint", "/nonexistent/file.py"}).code, kExitUsage);
}

TEST(Cli, NoApiKeyFlag) {
    EXPECT_EQ(cli({"run", "--api-key", "sk-x"}).code, kExitUsage);
}

TEST(Cli, MissingConfigIsUsageError) {
    TempDir dir;
    EXPECT_EQ(cli({"--config", (dir / "none.conf").string(), "run"}).code, kExitUsage);
}

TEST(Cli, LiveBackendWithoutKeyIsUsageError) {
    TempDir dir;
    ::unsetenv("AUTORESEARCH_API_KEY");
    const auto conf = write_replay_config(dir.path(), dir / "outputs");
    Invocation r = cli({"--config", conf.string(), "run", "--backend", "live"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("AUTORESEARCH_API_KEY"), std::string::npos);
}

TEST(Cli, ReplayWithoutTranscriptIsUsageError) {
    TempDir dir;
    const auto conf = write_replay_config(dir.path(), dir / "outputs");
    EXPECT_EQ(cli({"--config", conf.string(), "run", "--backend", "replay"}).code, kExitUsage);
    EXPECT_EQ(cli({"--config", conf.string(), "run", "--backend", "bogus"}).code, kExitUsage);
}

TEST(Cli, LintExitCodes) {
    EXPECT_EQ(cli({"lint", (fixtures() / "listing1.py").string()}).code, kExitOk);
    Invocation bad = cli({"lint", (fixtures() / "listing9.py").string()});
    EXPECT_EQ(bad.code, kExitFailure);
    EXPECT_NE(bad.out.find("listing9.py:3: error STUB_RETURN"), std::string::npos);
    Invocation warn = cli({"lint", (fixtures() / "listing15.py").string()});
    EXPECT_EQ(warn.code, kExitOk);
    EXPECT_NE(warn.out.find("warning STAT_TEST_PREREQ"), std::string::npos);
}

TEST(Cli, ReportFlags) {
    Invocation r = cli({"report", "--flags", (fixtures() / "paper_funnel.json").string()});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_NE(r.out.find("0.260"), std::string::npos);
}

TEST(Cli, ReportEmptyDirIsFailure) {
    TempDir dir;
    EXPECT_EQ(cli({"report", "--dir", dir.path().string()}).code, kExitFailure);
    EXPECT_EQ(cli({"report", "--dir", "a", "--flags", "b"}).code, kExitUsage);
}

TEST(Cli, ReplayMismatchExitsOne) {
    TempDir dir;
    // The transcript was recorded for a different problem, so the first fingerprint misses.
    write_file(dir / "other_problem.txt", "A completely different research question.\n");
    const auto conf = write_replay_config(dir.path(), dir / "outputs");
    Invocation r = cli({"--config", conf.string(), "run", "--backend", "replay", "--transcript",
                        (fixtures() / "transcripts" / "appendix_c.jsonl").string(), "--problem",
                        (dir / "other_problem.txt").string()});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_NE(r.err.find("replay miss"), std::string::npos);
}
