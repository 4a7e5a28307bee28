#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "error.hpp"
#include "evaluator.hpp"

using namespace lsi;

namespace {

const std::string kProblems = std::string(LSI_FIXTURE_DIR) + "/problems10.jsonl";

// Reference solutions for the toy fixture suite.
const std::map<std::string, std::string> kSolutions = {
    {"toy/001", "y = 7 * 7"},    {"toy/002", "s = 55"},
    {"toy/003", "m = 12"},       {"toy/004", "d = 17 / 5"},
    {"toy/005", "r = 17 % 5"},   {"toy/006", "p = 6 * 7"},
    {"toy/007", "n = 0 - 5"},    {"toy/008", "t = 10"},
    {"toy/009", "g = 100 - 58"}, {"toy/010", "c = 3 * 3 * 3"},
};

EvalConfig quick_config(int n = 1) {
    EvalConfig cfg;
    cfg.n = n;
    cfg.ks = {1};
    cfg.limits.timeout_sec = 5.0;
    cfg.workers = 4;
    cfg.model_id = "fixture";
    return cfg;
}

} // namespace

TEST_CASE("problem suite parsing") {
    auto problems = read_problems(kProblems);
    REQUIRE(problems.size() == 10);
    CHECK(problems[0].id == "toy/001");
    CHECK(problems[0].language == "toy");
    CHECK(!problems[0].tests.empty());

    std::string bad = (std::filesystem::temp_directory_path() / "lsi_bad_problems.jsonl").string();
    std::ofstream out(bad, std::ios::trunc);
    out << "{\"id\": \"a\"}\n";
    out.close();
    CHECK_THROWS_WITH_AS(read_problems(bad), doctest::Contains("line 1"), Error);
}

TEST_CASE("oracle generator scores 100%") {
    auto problems = read_problems(kProblems);
    auto report = evaluate(
        problems, [&](const Problem &p) { return std::vector<std::string>{kSolutions.at(p.id)}; },
        quick_config());
    CHECK(report.aggregate.at(1) == 1.0);
    for (const auto &r : report.problems) {
        CHECK(r.c == 1);
        CHECK(r.pass_at.at(1) == 1.0);
    }
}

TEST_CASE("null generator scores 0%") {
    auto problems = read_problems(kProblems);
    auto report = evaluate(
        problems, [](const Problem &) { return std::vector<std::string>{""}; }, quick_config());
    CHECK(report.aggregate.at(1) == 0.0);
}

TEST_CASE("scripted generator passing 4 of 10 yields pass@1 = 40.0%") {
    auto problems = read_problems(kProblems);
    const std::set<std::string> solved = {"toy/001", "toy/004", "toy/007", "toy/009"};
    auto generator = [&](const Problem &p) {
        if (solved.count(p.id)) return std::vector<std::string>{kSolutions.at(p.id)};
        return std::vector<std::string>{p.entry_point + " = 999999"};
    };
    auto report = evaluate(problems, generator, quick_config());
    CHECK(report.aggregate.at(1) == doctest::Approx(0.4).epsilon(1e-12));

    std::string table = render_report_table(report);
    CHECK(table.find("40.0%") != std::string::npos);
    CHECK(table.find("42.0%") != std::string::npos); // strongest reference row
    CHECK(table.find("not produced by this run") != std::string::npos);

    // rows sorted by id, per-problem counts match the script
    for (const auto &r : report.problems) {
        CHECK(r.c == (solved.count(r.id) ? 1 : 0));
    }
    for (size_t i = 1; i < report.problems.size(); i++) {
        CHECK(report.problems[i - 1].id < report.problems[i].id);
    }
}

TEST_CASE("generator failure records crash verdicts and evaluation continues") {
    auto problems = read_problems(kProblems);
    auto generator = [&](const Problem &p) -> std::vector<std::string> {
        if (p.id == "toy/002") fail(ErrorCode::internal, "backend unavailable");
        return {kSolutions.at(p.id)};
    };
    auto report = evaluate(problems, generator, quick_config());
    CHECK(report.aggregate.at(1) == doctest::Approx(0.9).epsilon(1e-12));
    const ProblemResult &failed = report.problems[1];
    CHECK(failed.id == "toy/002");
    CHECK(failed.c == 0);
    REQUIRE(failed.verdicts.size() == 1);
    CHECK(failed.verdicts[0].outcome == Outcome::crash);
    CHECK(failed.verdicts[0].output.find("backend unavailable") != std::string::npos);
}

TEST_CASE("multi-sample pass@k columns are consistent") {
    auto problems = read_problems(kProblems);
    // half the samples pass for every problem
    auto generator = [&](const Problem &p) {
        return std::vector<std::string>{kSolutions.at(p.id), p.entry_point + " = 999999",
                                        kSolutions.at(p.id), p.entry_point + " = 999999"};
    };
    EvalConfig cfg = quick_config(4);
    cfg.ks = {1, 2, 4};
    auto report = evaluate(problems, generator, cfg);
    CHECK(report.aggregate.at(1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.aggregate.at(2) > report.aggregate.at(1));
    CHECK(report.aggregate.at(4) == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto &r : report.problems) CHECK(r.c == 2);
}

TEST_CASE("evaluate validates n and k") {
    auto problems = read_problems(kProblems);
    auto gen = [](const Problem &) { return std::vector<std::string>{""}; };
    EvalConfig cfg = quick_config();
    cfg.ks = {2}; // k > n
    CHECK_THROWS_AS(evaluate(problems, gen, cfg), Error);
    cfg = quick_config();
    cfg.n = 0;
    CHECK_THROWS_AS(evaluate(problems, gen, cfg), Error);
}

TEST_CASE("json report roundtrips and re-renders identically") {
    auto problems = read_problems(kProblems);
    const std::set<std::string> solved = {"toy/003", "toy/005"};
    auto generator = [&](const Problem &p) {
        if (solved.count(p.id)) return std::vector<std::string>{kSolutions.at(p.id)};
        return std::vector<std::string>{""};
    };
    auto report = evaluate(problems, generator, quick_config());
    nlohmann::json j = report_to_json(report);
    EvalReport restored = report_from_json(j);
    CHECK(render_report_table(restored) == render_report_table(report));
    CHECK(report_to_json(restored).at("aggregate") == j.at("aggregate"));
    CHECK(report_to_json(restored).at("problems") == j.at("problems"));

    // json bytes are stable across dumps (sorted keys, sorted problem ids)
    CHECK(report_to_json(report).dump() == report_to_json(restored).dump());

    std::string path = (std::filesystem::temp_directory_path() / "lsi_report.json").string();
    write_report_json(report, path);
    std::ifstream in(path);
    nlohmann::json loaded = nlohmann::json::parse(in);
    CHECK(loaded == j);
}

TEST_CASE("empty problem list renders a stub table") {
    auto report = evaluate({}, [](const Problem &) { return std::vector<std::string>{""}; },
                           quick_config());
    std::string table = render_report_table(report);
    CHECK(table.find("no problems") != std::string::npos);
}

TEST_CASE("formatting of the aggregate percentage matches the reference style") {
    EvalReport report;
    report.model_id = "x";
    report.n = 1;
    report.ks = {1};
    report.aggregate[1] = 0.42;
    ProblemResult r;
    r.id = "p";
    r.n = 1;
    r.c = 0;
    r.pass_at[1] = 0.42;
    report.problems.push_back(r);
    std::string table = render_report_table(report);
    CHECK(table.find("pass@1   42.0%") != std::string::npos);
}
