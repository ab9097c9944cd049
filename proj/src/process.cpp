#include "autoresearch/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <optional>

extern char** environ;

namespace autoresearch {

namespace {

using Clock = std::chrono::steady_clock;

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Fd& operator=(Fd&& other) noexcept {
        if (this != &other) {
            reset();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }

    int get() const { return fd_; }
    explicit operator bool() const { return fd_ >= 0; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

std::pair<Fd, Fd> make_pipe() {
    std::array<int, 2> fds{};
    if (::pipe2(fds.data(), O_CLOEXEC) != 0) {
        throw ProcessError(std::string("pipe2 failed: ") + std::strerror(errno));
    }
    return {Fd(fds[0]), Fd(fds[1])};
}

struct Capture {
    Fd fd;
    std::string* text;
    bool* truncated;
    std::size_t cap;
};

// Reads what is available; returns false on EOF.
bool drain(Capture& c) {
    std::array<char, 65536> buf{};
    while (true) {
        const ssize_t n = ::read(c.fd.get(), buf.data(), buf.size());
        if (n > 0) {
            const std::size_t room = c.cap > c.text->size() ? c.cap - c.text->size() : 0;
            const std::size_t take = std::min(room, static_cast<std::size_t>(n));
            c.text->append(buf.data(), take);
            if (take < static_cast<std::size_t>(n)) *c.truncated = true;
            continue;
        }
        if (n == 0) return false;
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) return true;
        return false;
    }
}

std::optional<std::string> lookup_env(const std::vector<std::string>& env, std::string_view name) {
    for (const auto& kv : env) {
        if (kv.size() > name.size() && kv.compare(0, name.size(), name) == 0 && kv[name.size()] == '=') {
            return kv.substr(name.size() + 1);
        }
    }
    return std::nullopt;
}

[[noreturn]] void child_fail(int report_fd, int code) {
    const int err = errno;
    (void)!::write(report_fd, &code, sizeof code);
    (void)!::write(report_fd, &err, sizeof err);
    ::_exit(127);
}

} // namespace

std::string resolve_program(const std::string& program, const std::string& path_value) {
    if (program.empty() || program.find('/') != std::string::npos) return program;
    std::size_t start = 0;
    while (start <= path_value.size()) {
        std::size_t end = path_value.find(':', start);
        if (end == std::string::npos) end = path_value.size();
        std::string dir = path_value.substr(start, end - start);
        if (dir.empty()) dir = ".";
        const std::string candidate = dir + "/" + program;
        struct stat st{};
        if (::stat(candidate.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
            ::access(candidate.c_str(), X_OK) == 0) {
            return candidate;
        }
        start = end + 1;
    }
    return program;
}

std::vector<std::string> current_environment() {
    std::vector<std::string> env;
    for (char** e = environ; e && *e; ++e) env.emplace_back(*e);
    return env;
}

ProcessResult run_process(const ProcessSpec& spec) {
    if (spec.argv.empty()) throw ProcessError("empty argv");

    const std::string path_value =
        lookup_env(spec.env, "PATH").value_or(lookup_env(current_environment(), "PATH").value_or(""));
    const std::string program = resolve_program(spec.argv.front(), path_value);

    // Everything the child touches is prepared before fork.
    std::vector<char*> argv;
    for (const auto& a : spec.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    std::vector<char*> envp;
    for (const auto& e : spec.env) envp.push_back(const_cast<char*>(e.c_str()));
    envp.push_back(nullptr);
    const std::string cwd = spec.cwd.string();

    auto [out_r, out_w] = make_pipe();
    auto [err_r, err_w] = make_pipe();
    auto [rep_r, rep_w] = make_pipe();
    Fd devnull(::open("/dev/null", O_RDONLY | O_CLOEXEC));
    if (!devnull) throw ProcessError("cannot open /dev/null");

    ProcessResult result;
    const auto started = Clock::now();

    const pid_t pid = ::fork();
    if (pid < 0) throw ProcessError(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        const int rep = rep_w.get();
        ::setpgid(0, 0);
        if (spec.deny_network && ::unshare(CLONE_NEWNET) != 0 &&
            ::unshare(CLONE_NEWUSER | CLONE_NEWNET) != 0) {
            child_fail(rep, 1);
        }
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) child_fail(rep, 2);
        if (::dup2(devnull.get(), STDIN_FILENO) < 0 || ::dup2(out_w.get(), STDOUT_FILENO) < 0 ||
            ::dup2(err_w.get(), STDERR_FILENO) < 0) {
            child_fail(rep, 3);
        }
        ::signal(SIGPIPE, SIG_DFL);
        ::execve(program.c_str(), argv.data(), envp.data());
        child_fail(rep, 4);
    }

    ::setpgid(pid, pid);
    out_w.reset();
    err_w.reset();
    rep_w.reset();
    devnull.reset();

    // The report pipe closes on a successful exec; data means the child failed
    // before running the program.
    std::array<int, 2> report{};
    ssize_t got = 0;
    while (true) {
        got = ::read(rep_r.get(), report.data(), sizeof report);
        if (got < 0 && errno == EINTR) continue;
        break;
    }
    if (got > 0) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        static constexpr std::array<const char*, 5> kWhat{"", "network isolation (unshare)", "chdir",
                                                          "stdio redirection", "exec"};
        result.exit_code = 127;
        result.stderr_text = std::string("failed to start ") + spec.argv.front() + ": " +
                             kWhat[std::min(report[0], 4)] + ": " + std::strerror(report[1]) + "\n";
        result.duration_s = std::chrono::duration<double>(Clock::now() - started).count();
        return result;
    }

    std::array<Capture, 2> captures{
        Capture{std::move(out_r), &result.stdout_text, &result.stdout_truncated, spec.max_stream_bytes},
        Capture{std::move(err_r), &result.stderr_text, &result.stderr_truncated, spec.max_stream_bytes},
    };
    for (auto& c : captures) ::fcntl(c.fd.get(), F_SETFL, ::fcntl(c.fd.get(), F_GETFL) | O_NONBLOCK);

    const auto deadline = started + std::chrono::duration_cast<Clock::duration>(spec.timeout);
    std::optional<Clock::time_point> kill_at;
    std::optional<Clock::time_point> drain_until;
    bool exited = false;
    int status = 0;

    while (true) {
        if (!exited) {
            const pid_t w = ::waitpid(pid, &status, WNOHANG);
            if (w == pid) {
                exited = true;
                // Orphaned descendants must not keep the pipes open.
                ::killpg(pid, SIGKILL);
                drain_until = Clock::now() + std::chrono::seconds(2);
            }
        }
        const bool open = captures[0].fd || captures[1].fd;
        if (exited && (!open || Clock::now() >= *drain_until)) break;

        const auto now = Clock::now();
        if (!exited && !result.timed_out && now >= deadline) {
            result.timed_out = true;
            ::killpg(pid, SIGTERM);
            kill_at = now + std::chrono::duration_cast<Clock::duration>(spec.kill_grace);
        }
        if (!exited && kill_at && now >= *kill_at) {
            ::killpg(pid, SIGKILL);
            kill_at.reset();
        }

        std::array<pollfd, 2> pfds{};
        nfds_t n = 0;
        std::array<Capture*, 2> order{};
        for (auto& c : captures) {
            if (c.fd) {
                pfds[n] = {c.fd.get(), POLLIN, 0};
                order[n++] = &c;
            }
        }
        if (n == 0) {
            // Streams closed; wait for the child (or the deadline) in small steps.
            ::usleep(2000);
            continue;
        }
        ::poll(pfds.data(), n, 20);
        for (nfds_t i = 0; i < n; ++i) {
            if (pfds[i].revents & (POLLIN | POLLHUP | POLLERR)) {
                if (!drain(*order[i])) order[i]->fd.reset();
            }
        }
    }

    result.duration_s = std::chrono::duration<double>(Clock::now() - started).count();
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.term_signal = WTERMSIG(status);
        result.exit_code = 128 + result.term_signal;
    }
    if (result.timed_out && result.exit_code == 0) result.exit_code = 124;
    return result;
}

} // namespace autoresearch
