#include "sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "toylang.hpp"

namespace fs = std::filesystem;

namespace lsi {

const char *outcome_name(Outcome o) {
    switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::timeout: return "timeout";
    case Outcome::crash: return "crash";
    case Outcome::setup_error: return "setup-error";
    }
    return "?";
}

Outcome outcome_from(const std::string &name) {
    for (Outcome o : {Outcome::pass, Outcome::fail, Outcome::timeout, Outcome::crash,
                      Outcome::setup_error}) {
        if (name == outcome_name(o)) return o;
    }
    fail(ErrorCode::parse, "unknown verdict outcome: " + name);
}

namespace {

std::vector<std::string> split_command(const std::string &tmpl, const std::string &file) {
    std::vector<std::string> args;
    std::string current;
    for (char c : tmpl) {
        if (c == ' ') {
            if (!current.empty()) args.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) args.push_back(std::move(current));
    for (std::string &arg : args) {
        size_t pos;
        while ((pos = arg.find("{file}")) != std::string::npos) {
            arg.replace(pos, 6, file);
        }
    }
    return args;
}

std::string extension_for(const std::string &language) {
    if (language == "python") return "py";
    if (language == "typescript") return "ts";
    if (language == "javascript") return "js";
    return language;
}

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const std::string &root) {
        static std::atomic<uint64_t> counter{0};
        fs::path base = root.empty() ? fs::temp_directory_path() : fs::path(root);
        uint64_t tag = mix64((static_cast<uint64_t>(::getpid()) << 20) ^ counter.fetch_add(1) ^
                             static_cast<uint64_t>(
                                 std::chrono::steady_clock::now().time_since_epoch().count()));
        path = base / ("lsi-sbx-" + std::to_string(tag % 0xffffffffull));
        std::error_code ec;
        fs::create_directories(path, ec);
        if (ec) fail(ErrorCode::io, "cannot create scratch dir " + path.string());
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path, ec); // best effort
    }
};

} // namespace

Verdict execute_sandboxed(const std::string &program, const std::string &tests,
                          const std::string &language, const RunnerConfig &runners,
                          const ExecLimits &limits) {
    Verdict verdict;
    auto runner = runners.commands.find(language);
    if (runner == runners.commands.end()) {
        verdict.outcome = Outcome::setup_error;
        verdict.output = "no runner configured for language '" + language + "'";
        return verdict;
    }

    ScratchDir scratch(runners.temp_root);
    fs::path file = scratch.path / ("main." + extension_for(language));
    {
        std::ofstream out(file, std::ios::binary);
        out << program << "\n" << tests << "\n";
        if (!out) {
            verdict.outcome = Outcome::setup_error;
            verdict.output = "cannot write program file " + file.string();
            return verdict;
        }
    }

    bool builtin = runner->second == kBuiltinToyRunner;
    std::vector<std::string> args;
    if (!builtin) {
        args = split_command(runner->second, file.string());
        if (args.empty()) {
            verdict.outcome = Outcome::setup_error;
            verdict.output = "empty runner command for language '" + language + "'";
            return verdict;
        }
    }

    int pipe_fd[2];
    if (::pipe(pipe_fd) != 0) {
        verdict.outcome = Outcome::setup_error;
        verdict.output = "pipe() failed";
        return verdict;
    }

    auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipe_fd[0]);
        ::close(pipe_fd[1]);
        verdict.outcome = Outcome::setup_error;
        verdict.output = "fork() failed";
        return verdict;
    }

    if (pid == 0) {
        // child: own process group so the parent can kill the whole tree
        ::setpgid(0, 0);
        ::close(pipe_fd[0]);
        ::dup2(pipe_fd[1], STDOUT_FILENO);
        ::dup2(pipe_fd[1], STDERR_FILENO);
        ::close(pipe_fd[1]);
        if (limits.memory_bytes > 0) {
            rlimit rl{limits.memory_bytes, limits.memory_bytes};
            ::setrlimit(RLIMIT_AS, &rl); // best effort
        }
        if (builtin) {
            std::string source = program + "\n" + tests + "\n";
            std::string output;
            int code = run_toy_program(source, &output);
            ssize_t ignored = ::write(STDOUT_FILENO, output.data(), output.size());
            (void)ignored;
            ::_exit(code & 0xff);
        }
        std::vector<char *> argv;
        for (std::string &arg : args) argv.push_back(arg.data());
        argv.push_back(nullptr);
        ::execvp(argv[0], argv.data());
        const char *msg = "exec failed\n";
        ssize_t ignored = ::write(STDERR_FILENO, msg, std::strlen(msg));
        (void)ignored;
        ::_exit(127);
    }

    ::close(pipe_fd[1]);
    ::fcntl(pipe_fd[0], F_SETFL, O_NONBLOCK);

    auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(limits.timeout_sec));
    bool timed_out = false;
    bool pipe_open = true;
    bool exited = false;
    int status = 0;
    char buf[4096];
    auto drain = [&] {
        ssize_t got;
        while ((got = ::read(pipe_fd[0], buf, sizeof(buf))) > 0) {
            size_t room = limits.output_cap > verdict.output.size()
                              ? limits.output_cap - verdict.output.size()
                              : 0;
            verdict.output.append(buf, std::min(static_cast<size_t>(got), room));
        }
        if (got == 0) pipe_open = false;
    };

    while (!exited) {
        if (std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            break;
        }
        if (::waitpid(pid, &status, WNOHANG) == pid) {
            exited = true;
            break;
        }
        if (pipe_open) {
            pollfd pfd{pipe_fd[0], POLLIN, 0};
            if (::poll(&pfd, 1, 50) > 0) drain();
        } else {
            ::usleep(5000);
        }
    }
    if (!exited) ::waitpid(pid, &status, 0); // prompt after SIGKILL
    drain();
    ::kill(-pid, SIGKILL); // sweep up any stragglers in the group
    ::close(pipe_fd[0]);
    verdict.duration_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (timed_out) {
        verdict.outcome = Outcome::timeout;
    } else if (WIFSIGNALED(status)) {
        verdict.outcome = Outcome::crash;
        verdict.output += "\n[signal " + std::to_string(WTERMSIG(status)) + "]";
    } else if (WIFEXITED(status) && WEXITSTATUS(status) == 0) {
        verdict.outcome = Outcome::pass;
    } else {
        verdict.outcome = Outcome::fail;
        verdict.output +=
            "\n[exit " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + "]";
    }
    if (verdict.output.size() > limits.output_cap) {
        verdict.output.resize(limits.output_cap);
    }
    return verdict;
}

} // namespace lsi
