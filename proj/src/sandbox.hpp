#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace lsi {

enum class Outcome { pass, fail, timeout, crash, setup_error };
const char *outcome_name(Outcome o);
Outcome outcome_from(const std::string &name);

struct ExecLimits {
    double timeout_sec = 10.0;
    uint64_t memory_bytes = 256ull << 20; // RLIMIT_AS where supported
    size_t output_cap = 8192;             // captured bytes, stdout + stderr merged
};

struct Verdict {
    std::string problem_id;
    int sample_index = 0;
    Outcome outcome = Outcome::setup_error;
    double duration_sec = 0.0;
    std::string output;
};

// Command template for the built-in toy interpreter (runs forked, no exec).
inline constexpr const char *kBuiltinToyRunner = "builtin:toy";

struct RunnerConfig {
    // language tag -> command template containing {file}, or kBuiltinToyRunner
    std::map<std::string, std::string> commands;
    std::string temp_root; // empty = system temp dir

    static RunnerConfig with_builtins() {
        RunnerConfig cfg;
        cfg.commands["toy"] = kBuiltinToyRunner;
        return cfg;
    }
};

// Writes program + tests into a fresh scratch directory, runs the language's
// runner as a killable child process group with the given limits, and maps
// the exit status to a verdict: 0 pass, nonzero fail, signal crash, deadline
// timeout. Missing runner yields a setup_error verdict rather than throwing.
// Process-level isolation only; the scratch directory is removed afterwards.
Verdict execute_sandboxed(const std::string &program, const std::string &tests,
                          const std::string &language, const RunnerConfig &runners,
                          const ExecLimits &limits);

} // namespace lsi
