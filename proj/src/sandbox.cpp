#include "chorus/sandbox.hpp"

#include <atomic>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "chorus/error.hpp"
#include "chorus/text_util.hpp"

extern char** environ;

namespace chorus {

namespace fs = std::filesystem;

std::string_view to_string(ExecStatus status)
{
    switch (status) {
    case ExecStatus::optimal: return "optimal";
    case ExecStatus::infeasible: return "infeasible";
    case ExecStatus::unbounded: return "unbounded";
    case ExecStatus::runtime_error: return "runtime_error";
    case ExecStatus::timeout: return "timeout";
    case ExecStatus::parse_error: return "parse_error";
    }
    return "runtime_error";
}

std::optional<ExecStatus> exec_status_from_string(std::string_view name)
{
    for (auto s : {ExecStatus::optimal, ExecStatus::infeasible, ExecStatus::unbounded, ExecStatus::runtime_error,
                   ExecStatus::timeout, ExecStatus::parse_error}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

namespace {

std::string excerpt(std::string_view s)
{
    return std::string(s.substr(0, kStderrExcerptLimit));
}

std::string last_nonempty_line(const std::string& text)
{
    std::string last;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        auto line = trim(std::string_view(text).substr(pos, nl - pos));
        if (!line.empty()) last = std::move(line);
        pos = nl + 1;
    }
    return last;
}

} // namespace

ExecutionResult parse_runner_output(const std::string& stdout_text, const std::string& stderr_text)
{
    ExecutionResult r;
    const auto line = last_nonempty_line(stdout_text);
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("status") || !j["status"].is_string()) {
        r.status = ExecStatus::runtime_error;
        r.stderr_excerpt = excerpt("sandbox protocol violation; stdout: " + stdout_text.substr(0, 512) +
                                   (stderr_text.empty() ? "" : "; stderr: " + stderr_text));
        return r;
    }
    const auto status = exec_status_from_string(j["status"].get<std::string>());
    if (!status) {
        r.status = ExecStatus::runtime_error;
        r.stderr_excerpt = excerpt("sandbox reported unknown status '" + j["status"].get<std::string>() + "'");
        return r;
    }
    r.status = *status;
    if (j.contains("stderr_excerpt") && j["stderr_excerpt"].is_string()) {
        r.stderr_excerpt = excerpt(j["stderr_excerpt"].get<std::string>());
    } else if (!stderr_text.empty()) {
        r.stderr_excerpt = excerpt(stderr_text);
    }
    if (r.status == ExecStatus::optimal) {
        const auto obj = j.find("objective");
        if (obj == j.end() || !obj->is_number()) {
            r.status = ExecStatus::runtime_error;
            r.stderr_excerpt = excerpt("sandbox reported optimal without a numeric objective");
            return r;
        }
        r.objective = obj->get<double>();
    }
    return r;
}

// ---------------------------------------------------------------------------

std::string shell_quote(std::string_view s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    out += '\'';
    return out;
}

ProcessOutput run_process(const std::string& command, double deadline_seconds)
{
    using clock = std::chrono::steady_clock;
    int out_pipe[2];
    int err_pipe[2];
    if (pipe2(out_pipe, O_CLOEXEC) != 0) throw HarnessError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(err_pipe, O_CLOEXEC) != 0) {
        close(out_pipe[0]);
        close(out_pipe[1]);
        throw HarnessError(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], 1);
    posix_spawn_file_actions_adddup2(&actions, err_pipe[1], 2);
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);

    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    pid_t pid = 0;
    const auto start = clock::now();
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    close(out_pipe[1]);
    close(err_pipe[1]);
    if (rc != 0) {
        close(out_pipe[0]);
        close(err_pipe[0]);
        throw HarnessError(std::string("cannot spawn sandbox: ") + std::strerror(rc));
    }

    ProcessOutput result;
    constexpr std::size_t kCap = 1 << 20;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string* sinks[2] = {&result.out, &result.err};
    int open_fds = 2;
    const auto deadline = start + std::chrono::duration_cast<clock::duration>(
                                      std::chrono::duration<double>(deadline_seconds));
    char buf[8192];
    while (open_fds > 0) {
        const auto now = clock::now();
        if (now >= deadline) {
            result.timed_out = true;
            kill(-pid, SIGKILL);
            break;
        }
        const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
        const int n = poll(fds, 2, static_cast<int>(std::min<long long>(wait_ms, 1000)));
        if (n < 0) {
            if (errno == EINTR) continue;
            kill(-pid, SIGKILL);
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const auto got = read(fds[i].fd, buf, sizeof buf);
            if (got > 0) {
                if (sinks[i]->size() < kCap) sinks[i]->append(buf, static_cast<std::size_t>(got));
            } else if (got == 0 || errno != EINTR) {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    for (auto& f : fds) {
        if (f.fd >= 0) close(f.fd);
    }

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (result.timed_out) {
        // Stray grandchildren may outlive the shell; the group kill above covers them.
        result.exit_code = -1;
    } else if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else {
        result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    }
    result.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    return result;
}

// ---------------------------------------------------------------------------

CommandSandbox::CommandSandbox(std::string command, double grace_seconds)
    : command_(std::move(command)), grace_seconds_(grace_seconds)
{
    if (trim(command_).empty()) throw ConfigError("sandbox command is empty");
    auto tmpl = (fs::temp_directory_path() / "chorus-sandbox-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw HarnessError(std::string("cannot create scratch dir: ") + std::strerror(errno));
    scratch_dir_ = tmpl;
}

CommandSandbox::~CommandSandbox()
{
    std::error_code ec;
    fs::remove_all(scratch_dir_, ec);
}

std::string CommandSandbox::write_script(const std::string& code) const
{
    static std::atomic<unsigned long> counter{0};
    const auto path = (fs::path(scratch_dir_) / ("script_" + std::to_string(counter++) + ".py")).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw HarnessError("cannot write script to " + path);
    out << code;
    return path;
}

ExecutionResult CommandSandbox::run(const std::string& code, double timeout_seconds) const
{
    const auto path = write_script(code);
    char secs[32];
    std::snprintf(secs, sizeof secs, "%g", timeout_seconds);
    const auto cmd = command_ + " run " + shell_quote(path) + " --timeout " + secs;
    const auto proc = run_process(cmd, timeout_seconds + grace_seconds_);
    std::error_code ec;
    fs::remove(path, ec);

    ExecutionResult r;
    if (proc.timed_out) {
        r.status = ExecStatus::timeout;
        r.stderr_excerpt = excerpt(proc.err);
    } else {
        r = parse_runner_output(proc.out, proc.err);
    }
    r.wall_time = proc.wall_time;
    if (r.status == ExecStatus::timeout) r.objective.reset();
    return r;
}

bool CommandSandbox::check(const std::string& code) const
{
    const auto path = write_script(code);
    const auto proc = run_process(command_ + " check " + shell_quote(path), 30.0 + grace_seconds_);
    std::error_code ec;
    fs::remove(path, ec);
    if (proc.timed_out) throw HarnessError("syntax checker timed out");
    const auto j = nlohmann::json::parse(last_nonempty_line(proc.out), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("valid") || !j["valid"].is_boolean()) {
        throw HarnessError("syntax checker protocol violation: " + proc.out.substr(0, 256) + proc.err.substr(0, 256));
    }
    return j["valid"].get<bool>();
}

ExecutionResult execute_code(const std::string& code, const SandboxClient& sandbox, double timeout_seconds)
{
    if (timeout_seconds <= 0) throw ArgumentError("execute_code: timeout must be positive");
    auto r = sandbox.run(code, timeout_seconds);
    if (r.status != ExecStatus::optimal) r.objective.reset();
    return r;
}

} // namespace chorus
