#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "autoresearch/process.hpp"
#include "test_support.hpp"

using namespace autoresearch;
using namespace testing_support;

namespace {

ProcessSpec sh(const std::string& script, const fs::path& cwd) {
    ProcessSpec spec;
    spec.argv = {"/bin/sh", "-c", script};
    spec.cwd = cwd;
    spec.env = {"PATH=/usr/bin:/bin"};
    spec.timeout = std::chrono::seconds(20);
    return spec;
}

} // namespace

TEST(RunProcess, CapturesStreamsAndExitCode) {
    TempDir dir;
    ProcessResult r = run_process(sh("echo out; echo err 1>&2; exit 7", dir.path()));
    EXPECT_EQ(r.exit_code, 7);
    EXPECT_EQ(r.stdout_text, "out\n");
    EXPECT_EQ(r.stderr_text, "err\n");
    EXPECT_FALSE(r.timed_out);
}

TEST(RunProcess, RunsInCwdWithExactEnvironment) {
    TempDir dir;
    ProcessSpec spec = sh("pwd; echo \"[$FOO][$HOME]\"", dir.path());
    spec.env.push_back("FOO=bar");
    ProcessResult r = run_process(spec);
    EXPECT_EQ(r.stdout_text, fs::canonical(dir.path()).string() + "\n[bar][]\n");
}

TEST(RunProcess, TimeoutKillsProcessGroup) {
    TempDir dir;
    ProcessSpec spec = sh("(sleep 30; touch survived) & sleep 30", dir.path());
    spec.timeout = std::chrono::milliseconds(300);
    spec.kill_grace = std::chrono::milliseconds(200);
    const auto start = std::chrono::steady_clock::now();
    ProcessResult r = run_process(spec);
    EXPECT_TRUE(r.timed_out);
    EXPECT_NE(r.exit_code, 0);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    EXPECT_FALSE(fs::exists(dir / "survived"));
}

TEST(RunProcess, StreamCapTruncatesAndDrains) {
    TempDir dir;
    ProcessSpec spec = sh("head -c 200000 /dev/zero | tr '\\0' 'a'; echo done 1>&2", dir.path());
    spec.max_stream_bytes = 1000;
    ProcessResult r = run_process(spec);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.stdout_text.size(), 1000u);
    EXPECT_TRUE(r.stdout_truncated);
    EXPECT_FALSE(r.stderr_truncated);
    EXPECT_EQ(r.stderr_text, "done\n");
}

TEST(RunProcess, ExecFailureIs127) {
    TempDir dir;
    ProcessSpec spec;
    spec.argv = {"/nonexistent/program"};
    spec.cwd = dir.path();
    EXPECT_EQ(run_process(spec).exit_code, 127);
}

TEST(RunProcess, SignalExitCode) {
    TempDir dir;
    EXPECT_EQ(run_process(sh("kill -TERM $$", dir.path())).exit_code, 128 + 15);
}

TEST(ResolveProgram, SearchesPath) {
    EXPECT_EQ(resolve_program("sh", "/nonexistent:/bin"), "/bin/sh");
    EXPECT_EQ(resolve_program("./x", "/bin"), "./x");
    EXPECT_EQ(resolve_program("no-such-prog-xyz", "/bin"), "no-such-prog-xyz");
}
