// Command-line front end. Everything functional goes through the C API in
// lsi.h; this file only handles flags, the config file and printing.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsi.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

int exit_code_for(lsi_status status) {
    switch (status) {
    case LSI_OK: return kExitOk;
    case LSI_ERR_NUMERIC:
    case LSI_ERR_INTERNAL: return kExitInternal;
    default: return kExitUsage;
    }
}

int report_failure(lsi_status status) {
    std::cerr << "error: " << lsi_last_error() << "\n";
    return exit_code_for(status);
}

std::string trim(const std::string &s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Flat key/value view of the config file: "[train]\nrank = 8" becomes
// {"train.rank": "8"}. Nested section headers like [eval.runners] give
// "eval.runners.<key>".
std::map<std::string, std::string> load_config_file(const std::string &path, bool required) {
    std::map<std::string, std::string> out;
    std::ifstream in(path);
    if (!in) {
        if (required) {
            std::cerr << "error: cannot read config file " << path << "\n";
            std::exit(kExitUsage);
        }
        return out;
    }
    std::string line;
    std::string section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        if (text.front() == '[' && text.back() == ']') {
            section = trim(text.substr(1, text.size() - 2));
            continue;
        }
        size_t eq = text.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: " << path << " line " << line_no
                      << ": expected key = value\n";
            std::exit(kExitUsage);
        }
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

// Effective option resolution with precedence default < env < file < flag,
// tracking where each value came from for --verbose.
struct Ctx {
    std::map<std::string, std::string> file;
    std::vector<std::string> trace;
    bool verbose = false;

    template <typename T>
    T resolve(const CLI::Option *opt, const T &flag_value, const std::string &key,
              const T &default_value, const char *env_var = nullptr) {
        T value = default_value;
        std::string source = "default";
        if (env_var != nullptr) {
            const char *e = std::getenv(env_var);
            if (e != nullptr) {
                value = parse_as<T>(e, key);
                source = std::string("env ") + env_var;
            }
        }
        auto it = file.find(key);
        if (it != file.end()) {
            value = parse_as<T>(it->second, key);
            source = "file";
        }
        if (opt != nullptr && opt->count() > 0) {
            value = flag_value;
            source = "flag";
        }
        std::ostringstream os;
        os << key << " = " << display(value) << " (" << source << ")";
        trace.push_back(os.str());
        return value;
    }

    void dump() const {
        if (!verbose) return;
        for (const std::string &line : trace) std::cerr << "config: " << line << "\n";
    }

  private:
    template <typename T> static T parse_as(const std::string &text, const std::string &key) {
        std::istringstream is(text);
        T value{};
        if (!(is >> value)) {
            std::cerr << "error: config value for " << key << " is not valid: " << text << "\n";
            std::exit(kExitUsage);
        }
        return value;
    }
    template <typename T> static std::string display(const T &v) {
        std::ostringstream os;
        os << v;
        return os.str();
    }
};

template <> std::string Ctx::parse_as<std::string>(const std::string &text, const std::string &) {
    return text;
}
template <> bool Ctx::parse_as<bool>(const std::string &text, const std::string &key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    std::cerr << "error: config value for " << key << " is not a boolean: " << text << "\n";
    std::exit(kExitUsage);
}

struct ModelDims {
    int32_t vocab_size, d_model, n_heads, n_layers, d_ff, max_seq_len;
    uint64_t seed;
};

ModelDims resolve_model_dims(Ctx &ctx) {
    lsi_model_params defaults;
    lsi_model_params_init(&defaults);
    ModelDims dims;
    dims.vocab_size = ctx.resolve<int>(nullptr, 0, "model.vocab_size", defaults.vocab_size);
    dims.d_model = ctx.resolve<int>(nullptr, 0, "model.d_model", defaults.d_model);
    dims.n_heads = ctx.resolve<int>(nullptr, 0, "model.n_heads", defaults.n_heads);
    dims.n_layers = ctx.resolve<int>(nullptr, 0, "model.n_layers", defaults.n_layers);
    dims.d_ff = ctx.resolve<int>(nullptr, 0, "model.d_ff", defaults.d_ff);
    dims.max_seq_len = ctx.resolve<int>(nullptr, 0, "model.max_seq_len", defaults.max_seq_len);
    dims.seed = ctx.resolve<uint64_t>(nullptr, 0, "model.seed", defaults.seed);
    return dims;
}

struct ModelHandle {
    lsi_model *ptr = nullptr;
    ~ModelHandle() { lsi_model_free(ptr); }
};
struct DatasetHandle {
    lsi_dataset *ptr = nullptr;
    ~DatasetHandle() { lsi_dataset_free(ptr); }
};
struct ReportHandle {
    lsi_report *ptr = nullptr;
    ~ReportHandle() { lsi_report_free(ptr); }
};
struct OwnedString {
    char *ptr = nullptr;
    ~OwnedString() { lsi_string_free(ptr); }
};

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"lsi - byte-level LoRA instruction tuning and pass@k evaluation"};
    app.require_subcommand(1);
    std::string config_path = "lsi.toml";
    bool verbose = false;
    app.add_option("-c,--config", config_path, "config file (key = value with [sections])");
    app.add_flag("-v,--verbose", verbose, "print every effective option and its source");

    // dataset build
    CLI::App *dataset = app.add_subcommand("dataset", "instruction dataset pipeline");
    dataset->require_subcommand(1);
    CLI::App *build = dataset->add_subcommand("build", "corpus -> JSON Lines instruction pairs");
    std::string corpus_dir, build_out, extension = ".ts", endpoint, token;
    int64_t sample_n = 0;
    uint64_t build_seed = 0;
    int build_workers = 4;
    bool mock_client = false;
    build->add_option("--corpus", corpus_dir, "corpus root directory")->required();
    build->add_option("--out", build_out, "output JSON Lines path")->required();
    auto *opt_n = build->add_option("--n", sample_n, "snippets to sample (0 = all)");
    auto *opt_bseed = build->add_option("--seed", build_seed, "sampling seed");
    auto *opt_ext = build->add_option("--extension", extension, "corpus file extension");
    auto *opt_bworkers = build->add_option("--workers", build_workers, "pipeline worker count");
    auto *opt_mock = build->add_flag("--mock-client", mock_client,
                                     "use the deterministic offline client");
    auto *opt_endpoint = build->add_option("--endpoint", endpoint, "generation endpoint URL");
    auto *opt_token = build->add_option("--token", token, "generation auth token");

    // train
    CLI::App *train_cmd = app.add_subcommand("train", "instruction-tune adapters");
    std::string train_dataset, train_base = "init", train_out, targets = "kv", tmpl;
    int32_t rank = 0, epochs = 0, batch = 0, seq_len = 0, warmup = 0, max_steps = 0;
    double alpha = 0, dropout = 0, lr = 0, weight_decay = 0;
    uint64_t train_seed = 0;
    train_cmd->add_option("--dataset", train_dataset, "JSON Lines instruction pairs")->required();
    auto *opt_base = train_cmd->add_option("--base", train_base,
                                           "base checkpoint path, or \"init\" for a fresh model");
    train_cmd->add_option("--out", train_out, "output checkpoint path")->required();
    auto *opt_rank = train_cmd->add_option("--rank", rank, "adapter rank");
    auto *opt_alpha = train_cmd->add_option("--alpha", alpha, "adapter alpha");
    auto *opt_dropout = train_cmd->add_option("--dropout", dropout, "adapter dropout");
    auto *opt_targets = train_cmd->add_option("--targets", targets, "adapter targets (qkvo)");
    auto *opt_epochs = train_cmd->add_option("--epochs", epochs, "training epochs");
    auto *opt_batch = train_cmd->add_option("--batch-size", batch, "examples per step");
    auto *opt_seq = train_cmd->add_option("--seq-len", seq_len, "sequence budget");
    auto *opt_lr = train_cmd->add_option("--lr", lr, "peak learning rate");
    auto *opt_warmup = train_cmd->add_option("--warmup", warmup, "linear warm-up steps");
    auto *opt_wd = train_cmd->add_option("--weight-decay", weight_decay, "decoupled weight decay");
    auto *opt_tseed = train_cmd->add_option("--seed", train_seed, "training seed");
    auto *opt_msteps = train_cmd->add_option("--max-steps", max_steps, "hard optimizer-step cap");
    auto *opt_tmpl = train_cmd->add_option("--template", tmpl, "prompt template");

    // merge
    CLI::App *merge_cmd = app.add_subcommand("merge", "fold adapters into base weights");
    std::string merge_in, merge_out;
    merge_cmd->add_option("--in", merge_in, "checkpoint with adapters")->required();
    merge_cmd->add_option("--out", merge_out, "merged checkpoint path")->required();

    // generate
    CLI::App *gen_cmd = app.add_subcommand("generate", "complete one instruction");
    std::string gen_ckpt, instruction;
    int32_t max_new = 256;
    double temperature = 0.0;
    uint64_t gen_seed = 0;
    gen_cmd->add_option("--ckpt", gen_ckpt, "model checkpoint")->required();
    gen_cmd->add_option("--instruction", instruction, "instruction text")->required();
    auto *opt_maxnew = gen_cmd->add_option("--max-new", max_new, "completion token budget");
    auto *opt_temp = gen_cmd->add_option("--temperature", temperature, "0 = greedy");
    auto *opt_gseed = gen_cmd->add_option("--seed", gen_seed, "sampling seed");

    // eval
    CLI::App *eval_cmd = app.add_subcommand("eval", "pass@k harness");
    std::string problems_path, eval_ckpt, samples_path, json_out, temp_root;
    int32_t eval_n = 1, eval_workers = 0, eval_max_new = 256;
    std::vector<int32_t> eval_ks;
    double timeout_sec = 10.0, eval_temperature = 0.0;
    uint64_t eval_seed = 0;
    eval_cmd->add_option("--problems", problems_path, "problem suite JSON Lines")->required();
    eval_cmd->add_option("--ckpt", eval_ckpt, "model checkpoint for generation");
    eval_cmd->add_option("--samples", samples_path,
                         "pre-generated completions JSON Lines {id, completion}");
    auto *opt_en = eval_cmd->add_option("--n", eval_n, "samples per problem");
    eval_cmd->add_option("--k", eval_ks, "pass@k budgets (repeatable)");
    auto *opt_timeout = eval_cmd->add_option("--timeout", timeout_sec, "per-run seconds");
    eval_cmd->add_option("--json", json_out, "write the full JSON report here");
    auto *opt_eworkers = eval_cmd->add_option("--workers", eval_workers, "sandbox worker count");
    auto *opt_etemp = eval_cmd->add_option("--gen-temperature", eval_temperature, "0 = greedy");
    auto *opt_eseed = eval_cmd->add_option("--gen-seed", eval_seed, "sampling seed");
    auto *opt_emaxnew = eval_cmd->add_option("--gen-max-new", eval_max_new, "tokens per sample");
    auto *opt_troot = eval_cmd->add_option("--temp-root", temp_root, "sandbox scratch root");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Ctx ctx;
    ctx.verbose = verbose;
    bool config_from_flag = app.count("--config") > 0;
    ctx.file = load_config_file(config_path, config_from_flag);

    if (build->parsed()) {
        lsi_dataset_build_params params;
        lsi_dataset_build_params_init(&params);
        params.corpus_dir = corpus_dir.c_str();
        std::string ext = ctx.resolve<std::string>(opt_ext, extension, "dataset.extension", ".ts");
        params.extension = ext.c_str();
        params.sample_n = ctx.resolve<int64_t>(opt_n, sample_n, "dataset.n", 0);
        params.seed = ctx.resolve<uint64_t>(opt_bseed, build_seed, "dataset.seed", 0);
        params.out_path = build_out.c_str();
        params.workers = ctx.resolve<int>(opt_bworkers, build_workers, "dataset.workers", 4);
        params.use_mock_client =
            ctx.resolve<bool>(opt_mock, mock_client, "dataset.mock", false) ? 1 : 0;
        std::string ep = ctx.resolve<std::string>(opt_endpoint, endpoint, "generation.endpoint",
                                                  "", "LSI_GEN_ENDPOINT");
        std::string tk = ctx.resolve<std::string>(opt_token, token, "generation.token", "",
                                                  "LSI_GEN_TOKEN");
        params.endpoint = ep.empty() ? nullptr : ep.c_str();
        params.auth_token = tk.empty() ? nullptr : tk.c_str();
        ctx.dump();

        lsi_dataset_build_stats stats{};
        lsi_status status = lsi_dataset_build(&params, &stats);
        if (status != LSI_OK) return report_failure(status);
        std::cout << "snippets=" << stats.snippets_sampled << " pairs=" << stats.pairs_written
                  << " dropped=" << stats.pairs_dropped << "\n";
        if (stats.snippets_skipped > 0) {
            std::cerr << "warning: " << stats.snippets_skipped
                      << " snippets skipped after client failures\n";
        }
        return kExitOk;
    }

    if (train_cmd->parsed()) {
        lsi_train_params params;
        lsi_train_params_init(&params);
        lsi_lora_params lora;
        lsi_lora_params_init(&lora);

        lora.rank = ctx.resolve<int>(opt_rank, rank, "train.rank", lora.rank);
        lora.alpha = ctx.resolve<double>(opt_alpha, alpha, "train.alpha", lora.alpha);
        lora.dropout = ctx.resolve<double>(opt_dropout, dropout, "train.dropout", lora.dropout);
        std::string tg = ctx.resolve<std::string>(opt_targets, targets, "train.targets", "kv");
        lora.targets = tg.c_str();

        params.seq_len = ctx.resolve<int>(opt_seq, seq_len, "train.seq_len", params.seq_len);
        params.batch_size = ctx.resolve<int>(opt_batch, batch, "train.batch_size",
                                             params.batch_size);
        params.epochs = ctx.resolve<int>(opt_epochs, epochs, "train.epochs", params.epochs);
        params.warmup_steps =
            ctx.resolve<int>(opt_warmup, warmup, "train.warmup_steps", params.warmup_steps);
        params.max_steps = ctx.resolve<int>(opt_msteps, max_steps, "train.max_steps", 0);
        params.learning_rate =
            ctx.resolve<double>(opt_lr, lr, "train.learning_rate", params.learning_rate);
        params.weight_decay =
            ctx.resolve<double>(opt_wd, weight_decay, "train.weight_decay", params.weight_decay);
        params.seed = ctx.resolve<uint64_t>(opt_tseed, train_seed, "train.seed", 0);
        std::string template_text =
            ctx.resolve<std::string>(opt_tmpl, tmpl, "train.template", "");
        if (!template_text.empty()) params.prompt_template = template_text.c_str();
        std::string base =
            ctx.resolve<std::string>(opt_base, train_base, "train.base", "init");
        ctx.dump();

        std::printf("effective config: rank=%d alpha=%g dropout=%g batch=%d epochs=%d lr=%g "
                    "warmup=%d seq_len=%d targets=%s seed=%llu base=%s\n",
                    lora.rank, lora.alpha, lora.dropout, params.batch_size, params.epochs,
                    params.learning_rate, params.warmup_steps, params.seq_len, tg.c_str(),
                    static_cast<unsigned long long>(params.seed), base.c_str());

        ModelHandle model;
        lsi_status status;
        if (base == "init") {
            ModelDims dims = resolve_model_dims(ctx);
            lsi_model_params mp;
            lsi_model_params_init(&mp);
            mp.vocab_size = dims.vocab_size;
            mp.d_model = dims.d_model;
            mp.n_heads = dims.n_heads;
            mp.n_layers = dims.n_layers;
            mp.d_ff = dims.d_ff;
            mp.max_seq_len = dims.max_seq_len;
            mp.seed = dims.seed;
            status = lsi_model_create(&mp, &model.ptr);
        } else {
            status = lsi_model_load(base.c_str(), &model.ptr);
            // a staged checkpoint may still carry earlier adapters; fold them
            // so this run starts from the composed weights
            if (status == LSI_OK && lsi_model_has_adapters(model.ptr)) {
                std::cout << "base has adapters; merging before the new stage\n";
                status = lsi_model_merge_adapters(model.ptr);
            }
        }
        if (status != LSI_OK) return report_failure(status);

        status = lsi_model_attach_adapters(model.ptr, &lora, params.seed);
        if (status != LSI_OK) return report_failure(status);

        DatasetHandle data;
        status = lsi_dataset_open(train_dataset.c_str(), &data.ptr);
        if (status != LSI_OK) return report_failure(status);
        std::cout << "dataset: " << lsi_dataset_size(data.ptr) << " pairs\n";

        params.on_epoch = [](int32_t epoch, double mean_loss, void *) {
            std::printf("epoch %d mean_loss=%.6f\n", epoch, mean_loss);
        };
        lsi_train_stats stats{};
        status = lsi_train(model.ptr, data.ptr, &params, &stats);
        if (status != LSI_OK) return report_failure(status);
        std::printf("steps=%d final_loss=%.6f examples=%lld skipped=%lld\n", stats.steps,
                    stats.final_loss, static_cast<long long>(stats.examples_used),
                    static_cast<long long>(stats.examples_skipped));

        double fraction = 0.0;
        if (lsi_model_trainable_fraction(model.ptr, &fraction) == LSI_OK) {
            std::printf("trainable fraction: %.6f%%\n", fraction * 100.0);
        }
        status = lsi_model_save(model.ptr, train_out.c_str());
        if (status != LSI_OK) return report_failure(status);
        std::cout << "saved " << train_out << "\n";
        return kExitOk;
    }

    if (merge_cmd->parsed()) {
        ctx.dump();
        ModelHandle model;
        lsi_status status = lsi_model_load(merge_in.c_str(), &model.ptr);
        if (status != LSI_OK) return report_failure(status);
        int64_t total_before = 0, adapters_before = 0;
        lsi_model_param_counts(model.ptr, &total_before, &adapters_before);
        status = lsi_model_merge_adapters(model.ptr);
        if (status != LSI_OK) return report_failure(status);
        int64_t total_after = 0, adapters_after = 0;
        lsi_model_param_counts(model.ptr, &total_after, &adapters_after);
        std::printf("base parameters: before=%lld after=%lld (adapters folded: %lld)\n",
                    static_cast<long long>(total_before - adapters_before),
                    static_cast<long long>(total_after),
                    static_cast<long long>(adapters_before));
        status = lsi_model_save(model.ptr, merge_out.c_str());
        if (status != LSI_OK) return report_failure(status);
        std::cout << "saved " << merge_out << "\n";
        return kExitOk;
    }

    if (gen_cmd->parsed()) {
        lsi_generate_params params;
        lsi_generate_params_init(&params);
        params.max_new = ctx.resolve<int>(opt_maxnew, max_new, "generate.max_new", 256);
        params.temperature =
            ctx.resolve<double>(opt_temp, temperature, "generate.temperature", 0.0);
        params.seed = ctx.resolve<uint64_t>(opt_gseed, gen_seed, "generate.seed", 0);
        ctx.dump();

        ModelHandle model;
        lsi_status status = lsi_model_load(gen_ckpt.c_str(), &model.ptr);
        if (status != LSI_OK) return report_failure(status);
        OwnedString text;
        status = lsi_generate(model.ptr, instruction.c_str(), &params, &text.ptr);
        if (status != LSI_OK) return report_failure(status);
        std::cout << text.ptr << "\n";
        return kExitOk;
    }

    if (eval_cmd->parsed()) {
        lsi_eval_params params;
        lsi_eval_params_init(&params);
        params.problems_path = problems_path.c_str();
        if (!samples_path.empty()) params.samples_path = samples_path.c_str();
        params.n = ctx.resolve<int>(opt_en, eval_n, "eval.n", 1);
        if (eval_ks.empty()) eval_ks.push_back(1);
        params.ks = eval_ks.data();
        params.ks_len = static_cast<int32_t>(eval_ks.size());
        params.timeout_sec = ctx.resolve<double>(opt_timeout, timeout_sec, "eval.timeout", 10.0);
        params.workers = ctx.resolve<int>(opt_eworkers, eval_workers, "eval.workers", 0);
        params.gen_max_new = ctx.resolve<int>(opt_emaxnew, eval_max_new, "eval.max_new", 256);
        params.gen_temperature =
            ctx.resolve<double>(opt_etemp, eval_temperature, "eval.temperature", 0.0);
        params.gen_seed = ctx.resolve<uint64_t>(opt_eseed, eval_seed, "eval.seed", 0);
        std::string troot = ctx.resolve<std::string>(opt_troot, temp_root, "eval.temp_root", "");
        if (!troot.empty()) params.temp_root = troot.c_str();

        // [eval.runners] section: key = language, value = command template
        std::vector<std::string> langs, cmds;
        const std::string prefix = "eval.runners.";
        for (const auto &[key, value] : ctx.file) {
            if (key.rfind(prefix, 0) == 0) {
                langs.push_back(key.substr(prefix.size()));
                cmds.push_back(value);
                ctx.trace.push_back("runner " + langs.back() + " = " + value + " (file)");
            }
        }
        std::vector<const char *> lang_ptrs, cmd_ptrs;
        for (size_t i = 0; i < langs.size(); i++) {
            lang_ptrs.push_back(langs[i].c_str());
            cmd_ptrs.push_back(cmds[i].c_str());
        }
        params.runner_languages = lang_ptrs.data();
        params.runner_commands = cmd_ptrs.data();
        params.runner_count = static_cast<int32_t>(langs.size());
        ctx.dump();

        ModelHandle model;
        if (!eval_ckpt.empty()) {
            lsi_status status = lsi_model_load(eval_ckpt.c_str(), &model.ptr);
            if (status != LSI_OK) return report_failure(status);
            params.model_id = eval_ckpt.c_str();
        } else if (samples_path.empty()) {
            std::cerr << "error: eval needs --ckpt or --samples\n";
            return kExitUsage;
        } else {
            params.model_id = samples_path.c_str();
        }

        ReportHandle report;
        lsi_status status = lsi_eval_run(model.ptr, &params, &report.ptr);
        if (status != LSI_OK) return report_failure(status);

        OwnedString table;
        status = lsi_report_table(report.ptr, &table.ptr);
        if (status != LSI_OK) return report_failure(status);
        std::cout << table.ptr;

        if (!json_out.empty()) {
            status = lsi_report_save_json(report.ptr, json_out.c_str());
            if (status != LSI_OK) return report_failure(status);
            std::cout << "report written to " << json_out << "\n";
        }
        int64_t setup_errors = lsi_report_setup_error_count(report.ptr);
        if (setup_errors > 0) {
            std::cerr << "warning: " << setup_errors
                      << " executions had setup errors (missing runners?)\n";
        }
        return kExitOk;
    }

    return kExitUsage;
}
