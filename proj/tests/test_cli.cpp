#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

std::string temp_file(const std::string &name) {
    return (fs::temp_directory_path() / ("lsi_cli_" + name)).string();
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string read_all(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string &args) {
    std::string out_path = temp_file("stdout.txt");
    std::string err_path = temp_file("stderr.txt");
    std::string command = std::string(LSI_CLI_PATH) + " " + args + " > " + out_path + " 2> " +
                          err_path;
    int raw = std::system(command.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = read_all(out_path);
    r.err = read_all(err_path);
    return r;
}

const std::string kCorpus = std::string(LSI_FIXTURE_DIR) + "/corpus12";
const std::string kProblems = std::string(LSI_FIXTURE_DIR) + "/problems10.jsonl";

} // namespace

TEST_CASE("cli: no subcommand is a usage error") {
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("bogus-subcommand").exit_code == 2);
}

TEST_CASE("cli: dataset build is byte-deterministic and prints the summary") {
    std::string out_a = temp_file("ds_a.jsonl");
    std::string out_b = temp_file("ds_b.jsonl");
    std::string base_args = "dataset build --corpus " + kCorpus + " --n 10 --seed 42 --mock-client";
    RunResult a = run_cli(base_args + " --out " + out_a);
    REQUIRE(a.exit_code == 0);
    CHECK(a.out.find("snippets=10 pairs=20 dropped=0") != std::string::npos);
    RunResult b = run_cli(base_args + " --out " + out_b);
    REQUIRE(b.exit_code == 0);
    CHECK(read_all(out_a) == read_all(out_b));
    CHECK(read_all(out_a).find("\"instruction\"") != std::string::npos);
}

TEST_CASE("cli: oversampling the corpus names both counts") {
    RunResult r = run_cli("dataset build --corpus " + kCorpus +
                          " --n 50 --mock-client --out " + temp_file("na.jsonl"));
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("50") != std::string::npos);
    CHECK(r.err.find("12") != std::string::npos);
}

TEST_CASE("cli: train echoes the effective defaults and writes a checkpoint") {
    std::string ds = temp_file("train_ds.jsonl");
    REQUIRE(run_cli("dataset build --corpus " + kCorpus + " --n 4 --seed 1 --mock-client --out " +
                    ds).exit_code == 0);
    std::string ckpt = temp_file("trained.bin");
    RunResult r = run_cli("train --dataset " + ds + " --base init --out " + ckpt +
                          " --max-steps 1");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("rank=16 alpha=32 dropout=0.05 batch=16 epochs=5 lr=0.0002 warmup=50") !=
          std::string::npos);
    CHECK(r.out.find("epoch 1 mean_loss=") != std::string::npos);
    CHECK(fs::exists(ckpt));
}

TEST_CASE("cli: missing dataset file exits 2 and names the path") {
    RunResult r = run_cli("train --dataset /tmp/lsi_cli_missing_ds.jsonl --base init --out " +
                          temp_file("x.bin"));
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("/tmp/lsi_cli_missing_ds.jsonl") != std::string::npos);
}

TEST_CASE("cli: config file supplies values, flags override, verbose traces sources") {
    std::string ds = temp_file("cfg_ds.jsonl");
    REQUIRE(run_cli("dataset build --corpus " + kCorpus + " --n 2 --seed 1 --mock-client --out " +
                    ds).exit_code == 0);
    std::string config = temp_file("config.toml");
    {
        std::ofstream out(config, std::ios::trunc);
        out << "[train]\nrank = 4\nepochs = 1\n\n[model]\nd_model = 32\nd_ff = 48\n"
               "n_layers = 1\n";
    }
    std::string ckpt = temp_file("cfg.bin");
    RunResult file_only = run_cli("--config " + config + " --verbose train --dataset " + ds +
                                  " --base init --out " + ckpt + " --max-steps 1");
    REQUIRE(file_only.exit_code == 0);
    CHECK(file_only.out.find("rank=4") != std::string::npos);
    CHECK(file_only.err.find("train.rank = 4 (file)") != std::string::npos);
    CHECK(file_only.err.find("train.batch_size = 16 (default)") != std::string::npos);

    RunResult flag_wins = run_cli("--config " + config + " --verbose train --dataset " + ds +
                                  " --base init --out " + ckpt + " --max-steps 1 --rank 2");
    REQUIRE(flag_wins.exit_code == 0);
    CHECK(flag_wins.out.find("rank=2") != std::string::npos);
    CHECK(flag_wins.err.find("train.rank = 2 (flag)") != std::string::npos);

    RunResult missing_cfg = run_cli("--config /tmp/lsi_cli_no_such.toml train --dataset " + ds +
                                    " --base init --out " + ckpt);
    CHECK(missing_cfg.exit_code == 2);
}

TEST_CASE("cli: merge requires adapters and reports counts; double merge fails") {
    std::string ds = temp_file("merge_ds.jsonl");
    REQUIRE(run_cli("dataset build --corpus " + kCorpus + " --n 2 --seed 9 --mock-client --out " +
                    ds).exit_code == 0);
    std::string config = temp_file("merge_cfg.toml");
    {
        std::ofstream out(config, std::ios::trunc);
        out << "[model]\nd_model = 32\nd_ff = 48\nn_layers = 1\n";
    }
    std::string ckpt = temp_file("merge_in.bin");
    REQUIRE(run_cli("--config " + config + " train --dataset " + ds + " --base init --out " +
                    ckpt + " --max-steps 1").exit_code == 0);

    std::string merged = temp_file("merged.bin");
    RunResult m = run_cli("merge --in " + ckpt + " --out " + merged);
    REQUIRE(m.exit_code == 0);
    CHECK(m.out.find("before=") != std::string::npos);
    CHECK(m.out.find("after=") != std::string::npos);

    // greedy generation agrees token-for-token across the two paths
    std::string gen_args = " --instruction \"make a helper\" --max-new 16";
    RunResult unmerged_gen = run_cli("generate --ckpt " + ckpt + gen_args);
    RunResult merged_gen = run_cli("generate --ckpt " + merged + gen_args);
    REQUIRE(unmerged_gen.exit_code == 0);
    CHECK(unmerged_gen.out == merged_gen.out);

    RunResult again = run_cli("merge --in " + merged + " --out " + temp_file("merged2.bin"));
    CHECK(again.exit_code == 2);
    CHECK(again.err.find("adapters") != std::string::npos);
}

TEST_CASE("cli: generation is deterministic at temperature 0 and honors max-new 0") {
    std::string ds = temp_file("gen_ds.jsonl");
    REQUIRE(run_cli("dataset build --corpus " + kCorpus + " --n 2 --seed 5 --mock-client --out " +
                    ds).exit_code == 0);
    std::string config = temp_file("gen_cfg.toml");
    {
        std::ofstream out(config, std::ios::trunc);
        out << "[model]\nd_model = 32\nd_ff = 48\nn_layers = 1\n";
    }
    std::string ckpt = temp_file("gen.bin");
    REQUIRE(run_cli("--config " + config + " train --dataset " + ds + " --base init --out " +
                    ckpt + " --max-steps 1").exit_code == 0);

    RunResult a = run_cli("generate --ckpt " + ckpt + " --instruction \"do a thing\" --max-new 8");
    RunResult b = run_cli("generate --ckpt " + ckpt + " --instruction \"do a thing\" --max-new 8");
    REQUIRE(a.exit_code == 0);
    CHECK(a.out == b.out);

    RunResult empty = run_cli("generate --ckpt " + ckpt +
                              " --instruction \"do a thing\" --max-new 0");
    CHECK(empty.exit_code == 0);
    CHECK(empty.out == "\n");
}

TEST_CASE("cli: eval with a samples file renders the table and json") {
    std::string samples = temp_file("samples.jsonl");
    {
        std::ofstream out(samples, std::ios::trunc);
        out << R"({"id":"toy/001","completion":"y = 49"})" << "\n";
        out << R"({"id":"toy/002","completion":"s = 55"})" << "\n";
        out << R"({"id":"toy/003","completion":"m = 12"})" << "\n";
        out << R"({"id":"toy/004","completion":"d = 3"})" << "\n";
        for (int i = 5; i <= 10; i++) {
            out << R"({"id":"toy/)" << (i < 10 ? "00" : "0") << i
                << R"(","completion":"zz = 1"})" << "\n";
        }
    }
    std::string json_path = temp_file("report.json");
    RunResult r = run_cli("eval --problems " + kProblems + " --samples " + samples + " --json " +
                          json_path);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("pass@1   40.0%") != std::string::npos);
    CHECK(r.out.find("42.0%") != std::string::npos);
    CHECK(read_all(json_path).find("\"c\": 1") != std::string::npos);

    // identical invocation produces identical json apart from wall-clock
    // durations (stable key and problem ordering)
    std::string json_path2 = temp_file("report2.json");
    REQUIRE(run_cli("eval --problems " + kProblems + " --samples " + samples + " --json " +
                    json_path2).exit_code == 0);
    auto scrub = [](const std::string &path) {
        nlohmann::json j = nlohmann::json::parse(read_all(path));
        for (auto &problem : j["problems"]) {
            for (auto &verdict : problem["verdicts"]) verdict["duration_sec"] = 0.0;
        }
        return j.dump();
    };
    CHECK(scrub(json_path) == scrub(json_path2));
}

TEST_CASE("cli: eval with a missing runner warns but exits 0") {
    std::string problems = temp_file("cobol.jsonl");
    {
        std::ofstream out(problems, std::ios::trunc);
        out << R"({"id":"c/1","prompt":"p","tests":"t","entry_point":"e","language":"cobol"})"
            << "\n";
    }
    std::string samples = temp_file("cobol_samples.jsonl");
    {
        std::ofstream out(samples, std::ios::trunc);
        out << R"({"id":"c/1","completion":"x"})" << "\n";
    }
    RunResult r = run_cli("eval --problems " + problems + " --samples " + samples);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.0%") != std::string::npos);
    CHECK(r.err.find("warning: 1 executions had setup errors") != std::string::npos);
}
