#include <doctest.h>

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "sandbox.hpp"
#include "toylang.hpp"

using namespace lsi;

TEST_CASE("toy interpreter: arithmetic, variables and asserts") {
    std::string out;
    int code = run_toy_program("x = 2 * (3 + 4)\nprint x\nassert x == 14\n", &out);
    CHECK(code == 0);
    CHECK(out == "14\n");

    out.clear();
    code = run_toy_program("x = 1\nassert x == 2\n", &out);
    CHECK(code == 1);
    CHECK(out.find("assert failed at line 2") != std::string::npos);

    out.clear();
    CHECK(run_toy_program("x = 1 / 0\n", &out) == 2);
    CHECK(out.find("division by zero") != std::string::npos);

    out.clear();
    CHECK(run_toy_program("print missing\n", &out) == 2);
    CHECK(out.find("undefined variable") != std::string::npos);

    out.clear();
    CHECK(run_toy_program("??\n", &out) == 2);
}

TEST_CASE("toy interpreter: comparisons and precedence") {
    std::string out;
    CHECK(run_toy_program("a = 2 + 3 * 4\nassert a == 14\n"
                          "b = (2 + 3) * 4\nassert b == 20\n"
                          "c = 10 % 4\nassert c == 2\n"
                          "d = -3\nassert d < 0\nassert d >= -3\nassert 1 != 2\n",
                          &out) == 0);
}

TEST_CASE("sandbox: pass, fail and crash fixtures") {
    RunnerConfig runners = RunnerConfig::with_builtins();
    ExecLimits limits;
    limits.timeout_sec = 5.0;

    Verdict good = execute_sandboxed("y = 49", "assert y == 49", "toy", runners, limits);
    CHECK(good.outcome == Outcome::pass);
    CHECK(good.duration_sec < limits.timeout_sec);

    Verdict bad = execute_sandboxed("y = 48", "assert y == 49", "toy", runners, limits);
    CHECK(bad.outcome == Outcome::fail);
    CHECK(bad.output.find("assert failed") != std::string::npos);

    Verdict crashed = execute_sandboxed("crash", "assert 1", "toy", runners, limits);
    CHECK(crashed.outcome == Outcome::crash);
    CHECK(crashed.output.find("signal") != std::string::npos);
}

TEST_CASE("sandbox: infinite loop hits a timeout verdict within budget") {
    RunnerConfig runners = RunnerConfig::with_builtins();
    ExecLimits limits;
    limits.timeout_sec = 2.0;
    auto start = std::chrono::steady_clock::now();
    Verdict v = execute_sandboxed("loop", "assert 1", "toy", runners, limits);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(v.outcome == Outcome::timeout);
    CHECK(wall < 2.5);
}

TEST_CASE("sandbox: output is capped at the configured size") {
    RunnerConfig runners = RunnerConfig::with_builtins();
    ExecLimits limits;
    limits.timeout_sec = 10.0;
    limits.output_cap = 8192;
    Verdict v = execute_sandboxed("spam 5000", "assert 1 == 1", "toy", runners, limits);
    CHECK(v.outcome == Outcome::pass);
    CHECK(v.output.size() <= 8192);
    CHECK(v.output.size() > 4000);
}

TEST_CASE("sandbox: missing runner becomes a setup-error verdict") {
    RunnerConfig runners = RunnerConfig::with_builtins();
    Verdict v = execute_sandboxed("whatever", "tests", "cobol", runners, ExecLimits{});
    CHECK(v.outcome == Outcome::setup_error);
    CHECK(v.output.find("cobol") != std::string::npos);
}

TEST_CASE("sandbox: external runner command template") {
    RunnerConfig runners;
    runners.commands["sh"] = "/bin/sh {file}";
    Verdict ok = execute_sandboxed("true", "", "sh", runners, ExecLimits{});
    CHECK(ok.outcome == Outcome::pass);
    Verdict bad = execute_sandboxed("exit 3", "", "sh", runners, ExecLimits{});
    CHECK(bad.outcome == Outcome::fail);
    CHECK(bad.output.find("[exit 3]") != std::string::npos);

    RunnerConfig missing;
    missing.commands["sh"] = "/no/such/interpreter {file}";
    Verdict noexec = execute_sandboxed("true", "", "sh", missing, ExecLimits{});
    CHECK(noexec.outcome == Outcome::fail); // exec failure surfaces as exit 127
    CHECK(noexec.output.find("exec failed") != std::string::npos);
}

TEST_CASE("sandbox: verdicts are independent of execution order") {
    RunnerConfig runners = RunnerConfig::with_builtins();
    ExecLimits limits;
    limits.timeout_sec = 5.0;
    std::vector<std::pair<std::string, Outcome>> cases = {
        {"y = 1", Outcome::pass},
        {"y = 2", Outcome::fail},
        {"crash", Outcome::crash},
        {"y = 1", Outcome::pass},
    };
    // forward order
    for (const auto &[program, expected] : cases) {
        CHECK(execute_sandboxed(program, "assert y == 1", "toy", runners, limits).outcome ==
              expected);
    }
    // reverse order gives the same verdicts
    for (auto it = cases.rbegin(); it != cases.rend(); ++it) {
        CHECK(execute_sandboxed(it->first, "assert y == 1", "toy", runners, limits).outcome ==
              it->second);
    }
}
