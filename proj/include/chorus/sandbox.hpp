#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace chorus {

enum class ExecStatus { optimal, infeasible, unbounded, runtime_error, timeout, parse_error };

std::string_view to_string(ExecStatus status);
std::optional<ExecStatus> exec_status_from_string(std::string_view name);

struct ExecutionResult {
    ExecStatus status = ExecStatus::runtime_error;
    /// Present iff status == optimal.
    std::optional<double> objective;
    std::string stderr_excerpt;
    double wall_time = 0.0;
};

/// Runs a solver script and reports its outcome.
class SandboxClient {
public:
    virtual ~SandboxClient() = default;
    virtual ExecutionResult run(const std::string& code, double timeout_seconds) const = 0;
};

/// Compile-only check of a script. Throws HarnessError when the checker
/// itself cannot be reached or answers outside its protocol.
class SyntaxChecker {
public:
    virtual ~SyntaxChecker() = default;
    virtual bool check(const std::string& code) const = 0;
};

inline constexpr std::size_t kStderrExcerptLimit = 4096;

/// Decodes the runner's single-line JSON result (the last non-empty line of
/// its stdout). Anything off-protocol becomes runtime_error.
ExecutionResult parse_runner_output(const std::string& stdout_text, const std::string& stderr_text);

struct ProcessOutput {
    std::string out;
    std::string err;
    int exit_code = -1;
    bool timed_out = false;
    double wall_time = 0.0;
};

/// Runs `/bin/sh -c command` in its own process group; the whole group is
/// killed once `deadline_seconds` elapse.
ProcessOutput run_process(const std::string& command, double deadline_seconds);

/// Invokes an external runner: `<command> run <file> --timeout <sec>` and
/// `<command> check <file>`. Scripts are written to a private scratch
/// directory; the runner's result is one JSON line on stdout.
class CommandSandbox final : public SandboxClient, public SyntaxChecker {
public:
    /// `grace_seconds` is added to the runner's own timeout before the process
    /// group is killed.
    explicit CommandSandbox(std::string command, double grace_seconds = 2.0);
    ~CommandSandbox() override;

    CommandSandbox(const CommandSandbox&) = delete;
    CommandSandbox& operator=(const CommandSandbox&) = delete;

    ExecutionResult run(const std::string& code, double timeout_seconds) const override;
    bool check(const std::string& code) const override;

    const std::string& command() const { return command_; }

private:
    std::string write_script(const std::string& code) const;

    std::string command_;
    double grace_seconds_;
    std::string scratch_dir_;
};

ExecutionResult execute_code(const std::string& code, const SandboxClient& sandbox, double timeout_seconds = 30.0);

std::string shell_quote(std::string_view s);

} // namespace chorus
