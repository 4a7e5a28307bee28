#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sandbox.hpp"

namespace lsi {

struct Problem {
    std::string id;
    std::string prompt;      // signature + docstring handed to the generator
    std::string tests;       // executable test program appended to a candidate
    std::string entry_point;
    std::string language;
};

// JSON Lines, keys {id, prompt, tests, entry_point, language}.
std::vector<Problem> read_problems(const std::string &path);

struct ProblemResult {
    std::string id;
    int n = 0;
    int c = 0;                        // passing samples
    std::map<int, double> pass_at;    // k -> estimate
    std::vector<Verdict> verdicts;    // one per sample
};

// Published pass@1 percentages shown next to local results for context.
struct ReferenceScore {
    const char *model;
    const char *size;
    double pass1_percent;
};
extern const std::vector<ReferenceScore> kReferenceScores;

struct EvalReport {
    std::vector<ProblemResult> problems; // sorted by id
    std::map<int, double> aggregate;     // k -> mean over problems
    std::string model_id;
    std::string generation_params;       // recorded, not interpreted
    int n = 1;
    std::vector<int> ks = {1};
};

// Returns n candidate programs for a problem. Throwing marks every sample
// of that problem as a crash; evaluation continues.
using Generator = std::function<std::vector<std::string>(const Problem &)>;

struct EvalConfig {
    int n = 1;
    std::vector<int> ks = {1};
    ExecLimits limits;
    RunnerConfig runners = RunnerConfig::with_builtins();
    int workers = 0; // 0 = hardware concurrency
    std::string model_id = "local";
    std::string generation_params;
};

EvalReport evaluate(const std::vector<Problem> &problems, const Generator &generator,
                    const EvalConfig &config);

// Table 2-style text table, percentages to one decimal; includes the
// reference rows and one row per requested k for this run.
std::string render_report_table(const EvalReport &report);

nlohmann::json report_to_json(const EvalReport &report);
EvalReport report_from_json(const nlohmann::json &j);
void write_report_json(const EvalReport &report, const std::string &path);

} // namespace lsi
