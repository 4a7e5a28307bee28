#include "evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "error.hpp"
#include "passk.hpp"

namespace lsi {

const std::vector<ReferenceScore> kReferenceScores = {
    {"CodeGeeX", "13B", 10.1},
    {"CodeGen-Multi", "16B", 20.1},
    {"StarCoder Base", "15.5B", 32.3},
    {"Code Llama", "13B", 29.6},
    {"Code Llama", "34B", 33.3},
    {"Code Llama - Instruct", "13B", 39.0},
    {"Code Llama - Instruct", "34B", 40.3},
    {"CodeLSI General Knowledge Model", "13B", 37.9},
    {"CodeLSI General Knowledge Model - Instruct", "13B", 42.0},
};

std::vector<Problem> read_problems(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open problem suite: " + path);
    std::vector<Problem> problems;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Problem p;
            p.id = j.at("id").get<std::string>();
            p.prompt = j.at("prompt").get<std::string>();
            p.tests = j.at("tests").get<std::string>();
            p.entry_point = j.at("entry_point").get<std::string>();
            p.language = j.at("language").get<std::string>();
            if (p.id.empty() || p.tests.empty()) {
                fail(ErrorCode::parse, "id and tests must be non-empty");
            }
            problems.push_back(std::move(p));
        } catch (const nlohmann::json::exception &e) {
            fail(ErrorCode::parse, path + " line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error &e) {
            fail(ErrorCode::parse, path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    for (size_t i = 0; i < problems.size(); i++) {
        for (size_t j = i + 1; j < problems.size(); j++) {
            if (problems[i].id == problems[j].id) {
                fail(ErrorCode::parse, path + ": duplicate problem id " + problems[i].id);
            }
        }
    }
    return problems;
}

EvalReport evaluate(const std::vector<Problem> &problems, const Generator &generator,
                    const EvalConfig &config) {
    if (config.n < 1) fail(ErrorCode::invalid_argument, "n must be >= 1");
    if (config.ks.empty()) fail(ErrorCode::invalid_argument, "at least one k is required");
    for (int k : config.ks) {
        if (k < 1 || k > config.n) {
            fail(ErrorCode::invalid_argument,
                 "k=" + std::to_string(k) + " outside [1, n=" + std::to_string(config.n) + "]");
        }
    }

    EvalReport report;
    report.n = config.n;
    report.ks = config.ks;
    std::sort(report.ks.begin(), report.ks.end());
    report.ks.erase(std::unique(report.ks.begin(), report.ks.end()), report.ks.end());
    report.model_id = config.model_id;
    report.generation_params = config.generation_params;

    struct Job {
        size_t problem_index;
        int sample_index;
    };
    std::vector<std::vector<std::string>> samples(problems.size());
    std::vector<std::vector<Verdict>> verdicts(problems.size());
    std::vector<bool> generator_failed(problems.size(), false);
    std::vector<Job> jobs;

    for (size_t pi = 0; pi < problems.size(); pi++) {
        verdicts[pi].resize(config.n);
        try {
            samples[pi] = generator(problems[pi]);
            if (static_cast<int>(samples[pi].size()) < config.n) {
                fail(ErrorCode::internal,
                     "generator returned " + std::to_string(samples[pi].size()) +
                         " samples, need " + std::to_string(config.n));
            }
        } catch (const std::exception &e) {
            generator_failed[pi] = true;
            for (int si = 0; si < config.n; si++) {
                Verdict v;
                v.problem_id = problems[pi].id;
                v.sample_index = si;
                v.outcome = Outcome::crash;
                v.output = std::string("generator failed: ") + e.what();
                verdicts[pi][si] = std::move(v);
            }
            continue;
        }
        for (int si = 0; si < config.n; si++) jobs.push_back({pi, si});
    }

    std::atomic<size_t> cursor{0};
    int width = config.workers > 0 ? config.workers
                                   : std::max(1u, std::thread::hardware_concurrency());
    width = std::max(1, std::min<int>(width, static_cast<int>(jobs.size() == 0 ? 1 : jobs.size())));
    auto worker = [&] {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job &job = jobs[i];
            const Problem &problem = problems[job.problem_index];
            Verdict v = execute_sandboxed(samples[job.problem_index][job.sample_index],
                                          problem.tests, problem.language, config.runners,
                                          config.limits);
            v.problem_id = problem.id;
            v.sample_index = job.sample_index;
            verdicts[job.problem_index][job.sample_index] = std::move(v);
        }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < width; w++) threads.emplace_back(worker);
    for (auto &t : threads) t.join();

    for (size_t pi = 0; pi < problems.size(); pi++) {
        ProblemResult r;
        r.id = problems[pi].id;
        r.n = config.n;
        r.verdicts = std::move(verdicts[pi]);
        for (const Verdict &v : r.verdicts) {
            if (v.outcome == Outcome::pass) r.c++;
        }
        for (int k : report.ks) r.pass_at[k] = pass_at_k(r.n, r.c, k);
        report.problems.push_back(std::move(r));
    }
    std::sort(report.problems.begin(), report.problems.end(),
              [](const ProblemResult &a, const ProblemResult &b) { return a.id < b.id; });

    for (int k : report.ks) {
        double total = 0.0;
        for (const ProblemResult &r : report.problems) total += r.pass_at.at(k);
        report.aggregate[k] =
            report.problems.empty() ? 0.0 : total / static_cast<double>(report.problems.size());
    }
    return report;
}

namespace {

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", fraction * 100.0);
    return buf;
}

} // namespace

std::string render_report_table(const EvalReport &report) {
    std::ostringstream os;
    os << "Pass@1 scores, published reference results (not produced by this run):\n";
    os << "  Model                                         Size    Result\n";
    for (const ReferenceScore &ref : kReferenceScores) {
        char line[128];
        std::snprintf(line, sizeof(line), "  %-45s %-7s %.1f%%\n", ref.model, ref.size,
                      ref.pass1_percent);
        os << line;
    }
    os << "\n";
    if (report.problems.empty()) {
        os << "This run: no problems evaluated.\n";
        return os.str();
    }
    os << "This run (" << report.model_id << ", " << report.problems.size() << " problems, n="
       << report.n << "):\n";
    for (int k : report.ks) {
        char line[128];
        std::snprintf(line, sizeof(line), "  pass@%-3d %s\n", k,
                      percent(report.aggregate.at(k)).c_str());
        os << line;
    }
    return os.str();
}

nlohmann::json report_to_json(const EvalReport &report) {
    nlohmann::json problems = nlohmann::json::array();
    for (const ProblemResult &r : report.problems) {
        nlohmann::json pass_at = nlohmann::json::object();
        for (const auto &[k, v] : r.pass_at) pass_at["pass@" + std::to_string(k)] = v;
        nlohmann::json verdicts = nlohmann::json::array();
        for (const Verdict &v : r.verdicts) {
            verdicts.push_back({
                {"sample_index", v.sample_index},
                {"outcome", outcome_name(v.outcome)},
                {"duration_sec", v.duration_sec},
                {"output", v.output},
            });
        }
        problems.push_back({
            {"id", r.id},
            {"n", r.n},
            {"c", r.c},
            {"pass_at", pass_at},
            {"verdicts", verdicts},
        });
    }
    nlohmann::json aggregate = nlohmann::json::object();
    for (const auto &[k, v] : report.aggregate) aggregate["pass@" + std::to_string(k)] = v;
    nlohmann::json reference = nlohmann::json::array();
    for (const ReferenceScore &ref : kReferenceScores) {
        reference.push_back({
            {"model", ref.model},
            {"size", ref.size},
            {"pass@1_percent", ref.pass1_percent},
            {"note", "published reference result, not produced by this run"},
        });
    }
    return {
        {"aggregate", aggregate},
        {"generation_params", report.generation_params},
        {"ks", report.ks},
        {"model", report.model_id},
        {"n", report.n},
        {"problems", problems},
        {"reference_scores", reference},
    };
}

EvalReport report_from_json(const nlohmann::json &j) {
    EvalReport report;
    report.model_id = j.at("model").get<std::string>();
    report.generation_params = j.value("generation_params", "");
    report.n = j.at("n").get<int>();
    report.ks = j.at("ks").get<std::vector<int>>();
    for (const auto &[key, value] : j.at("aggregate").items()) {
        report.aggregate[std::stoi(key.substr(5))] = value.get<double>();
    }
    for (const auto &jp : j.at("problems")) {
        ProblemResult r;
        r.id = jp.at("id").get<std::string>();
        r.n = jp.at("n").get<int>();
        r.c = jp.at("c").get<int>();
        for (const auto &[key, value] : jp.at("pass_at").items()) {
            r.pass_at[std::stoi(key.substr(5))] = value.get<double>();
        }
        for (const auto &jv : jp.at("verdicts")) {
            Verdict v;
            v.problem_id = r.id;
            v.sample_index = jv.at("sample_index").get<int>();
            v.outcome = outcome_from(jv.at("outcome").get<std::string>());
            v.duration_sec = jv.at("duration_sec").get<double>();
            v.output = jv.at("output").get<std::string>();
            r.verdicts.push_back(std::move(v));
        }
        report.problems.push_back(std::move(r));
    }
    return report;
}

void write_report_json(const EvalReport &report, const std::string &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write report: " + path);
    out << report_to_json(report).dump(2) << "\n";
    if (!out) fail(ErrorCode::io, "write failed for report: " + path);
}

} // namespace lsi
