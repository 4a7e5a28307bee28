#include "lsi.h"

#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "evaluator.hpp"
#include "gen_client.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"
#include "trainer.hpp"

using namespace lsi;

struct lsi_model {
    Model model;
};

struct lsi_dataset {
    std::vector<InstructionPair> pairs;
};

struct lsi_report {
    EvalReport report;
};

namespace {

thread_local std::string g_last_error;

lsi_status status_for(const Error &e) {
    switch (e.code()) {
    case ErrorCode::invalid_argument: return LSI_ERR_INVALID_ARGUMENT;
    case ErrorCode::io: return LSI_ERR_IO;
    case ErrorCode::parse: return LSI_ERR_PARSE;
    case ErrorCode::state: return LSI_ERR_STATE;
    case ErrorCode::checksum: return LSI_ERR_CHECKSUM;
    case ErrorCode::numeric: return LSI_ERR_NUMERIC;
    case ErrorCode::internal: return LSI_ERR_INTERNAL;
    }
    return LSI_ERR_INTERNAL;
}

template <typename Fn> lsi_status guarded(Fn &&fn) {
    try {
        fn();
        return LSI_OK;
    } catch (const Error &e) {
        g_last_error = e.what();
        return status_for(e);
    } catch (const std::exception &e) {
        g_last_error = e.what();
        return LSI_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return LSI_ERR_INTERNAL;
    }
}

lsi_status invalid(const char *msg) {
    g_last_error = msg;
    return LSI_ERR_INVALID_ARGUMENT;
}

char *dup_string(const std::string &s) {
    char *out = static_cast<char *>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// Completions from a JSON Lines file of {id, completion} records.
std::map<std::string, std::vector<std::string>> read_samples(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open samples file: " + path);
    std::map<std::string, std::vector<std::string>> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out[j.at("id").get<std::string>()].push_back(j.at("completion").get<std::string>());
        } catch (const nlohmann::json::exception &e) {
            fail(ErrorCode::parse, path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace

extern "C" {

const char *lsi_version(void) { return "0.1.0"; }

const char *lsi_last_error(void) { return g_last_error.c_str(); }

void lsi_string_free(char *s) { std::free(s); }

/* ---- model ---- */

void lsi_model_params_init(lsi_model_params *params) {
    if (params == nullptr) return;
    ModelConfig defaults;
    params->vocab_size = defaults.vocab_size;
    params->d_model = defaults.d_model;
    params->n_heads = defaults.n_heads;
    params->n_layers = defaults.n_layers;
    params->d_ff = defaults.d_ff;
    params->max_seq_len = defaults.max_seq_len;
    params->seed = defaults.seed;
}

lsi_status lsi_model_create(const lsi_model_params *params, lsi_model **out) {
    if (params == nullptr || out == nullptr) return invalid("params and out must be non-NULL");
    return guarded([&] {
        ModelConfig config;
        config.vocab_size = params->vocab_size;
        config.d_model = params->d_model;
        config.n_heads = params->n_heads;
        config.n_layers = params->n_layers;
        config.d_ff = params->d_ff;
        config.max_seq_len = params->max_seq_len;
        config.seed = params->seed;
        *out = new lsi_model{Model::init(config)};
    });
}

lsi_status lsi_model_load(const char *path, lsi_model **out) {
    if (path == nullptr || out == nullptr) return invalid("path and out must be non-NULL");
    return guarded([&] { *out = new lsi_model{load_model(path)}; });
}

lsi_status lsi_model_save(const lsi_model *model, const char *path) {
    if (model == nullptr || path == nullptr) return invalid("model and path must be non-NULL");
    return guarded([&] { save_model(model->model, path); });
}

void lsi_model_free(lsi_model *model) { delete model; }

int lsi_model_has_adapters(const lsi_model *model) {
    return model != nullptr && model->model.has_lora() ? 1 : 0;
}

lsi_status lsi_model_param_counts(const lsi_model *model, int64_t *total, int64_t *adapters) {
    if (model == nullptr) return invalid("model must be non-NULL");
    if (total != nullptr) *total = model->model.total_param_count();
    if (adapters != nullptr) *adapters = model->model.adapter_param_count();
    return LSI_OK;
}

/* ---- adapters ---- */

void lsi_lora_params_init(lsi_lora_params *params) {
    if (params == nullptr) return;
    LoraConfig defaults;
    params->rank = defaults.rank;
    params->alpha = defaults.alpha;
    params->dropout = defaults.dropout;
    params->targets = "kv";
}

lsi_status lsi_model_attach_adapters(lsi_model *model, const lsi_lora_params *params,
                                     uint64_t init_seed) {
    if (model == nullptr || params == nullptr) return invalid("model and params must be non-NULL");
    return guarded([&] {
        LoraConfig config;
        config.rank = params->rank;
        config.alpha = params->alpha;
        config.dropout = params->dropout;
        config.targets =
            parse_lora_targets(params->targets != nullptr ? params->targets : "kv");
        lora_attach(model->model, config, init_seed);
    });
}

lsi_status lsi_model_merge_adapters(lsi_model *model) {
    if (model == nullptr) return invalid("model must be non-NULL");
    return guarded([&] { lora_merge(model->model); });
}

lsi_status lsi_model_trainable_fraction(const lsi_model *model, double *out) {
    if (model == nullptr || out == nullptr) return invalid("model and out must be non-NULL");
    return guarded([&] { *out = lora_trainable_fraction(model->model); });
}

/* ---- dataset ---- */

void lsi_dataset_build_params_init(lsi_dataset_build_params *params) {
    if (params == nullptr) return;
    std::memset(params, 0, sizeof(*params));
    params->extension = ".ts";
    params->workers = 4;
}

lsi_status lsi_dataset_build(const lsi_dataset_build_params *params,
                             lsi_dataset_build_stats *stats) {
    if (params == nullptr || params->corpus_dir == nullptr || params->out_path == nullptr) {
        return invalid("corpus_dir and out_path must be set");
    }
    return guarded([&] {
        PipelineConfig config;
        config.corpus_root = params->corpus_dir;
        config.extension = params->extension != nullptr ? params->extension : ".ts";
        config.sample_n = params->sample_n > 0 ? static_cast<size_t>(params->sample_n) : 0;
        config.seed = params->seed;
        config.workers = params->workers > 0 ? params->workers : 4;

        PipelineResult result;
        if (params->use_mock_client != 0) {
            MockGenClient client(params->seed);
            result = run_pipeline(config, client);
        } else {
            HttpGenClient client = HttpGenClient::from_env(
                params->endpoint != nullptr ? params->endpoint : "",
                params->auth_token != nullptr ? params->auth_token : "");
            result = run_pipeline(config, client);
        }
        write_jsonl(result.pairs, params->out_path);
        if (stats != nullptr) {
            stats->snippets_ingested = static_cast<int64_t>(result.snippets_ingested);
            stats->snippets_sampled = static_cast<int64_t>(result.snippets_sampled);
            stats->pairs_written = static_cast<int64_t>(result.pairs.size());
            stats->pairs_dropped = static_cast<int64_t>(result.dropped.size());
            stats->snippets_skipped = static_cast<int64_t>(result.skipped.size());
        }
    });
}

lsi_status lsi_dataset_open(const char *jsonl_path, lsi_dataset **out) {
    if (jsonl_path == nullptr || out == nullptr) return invalid("path and out must be non-NULL");
    return guarded([&] { *out = new lsi_dataset{read_jsonl(jsonl_path)}; });
}

int64_t lsi_dataset_size(const lsi_dataset *dataset) {
    return dataset == nullptr ? 0 : static_cast<int64_t>(dataset->pairs.size());
}

void lsi_dataset_free(lsi_dataset *dataset) { delete dataset; }

/* ---- training ---- */

void lsi_train_params_init(lsi_train_params *params) {
    if (params == nullptr) return;
    std::memset(params, 0, sizeof(*params));
    TrainConfig defaults;
    params->seq_len = defaults.seq_len;
    params->batch_size = defaults.batch_size;
    params->epochs = defaults.epochs;
    params->warmup_steps = defaults.warmup_steps;
    params->learning_rate = defaults.learning_rate;
    params->weight_decay = defaults.weight_decay;
}

lsi_status lsi_train(lsi_model *model, const lsi_dataset *dataset,
                     const lsi_train_params *params, lsi_train_stats *stats) {
    if (model == nullptr || dataset == nullptr || params == nullptr) {
        return invalid("model, dataset and params must be non-NULL");
    }
    return guarded([&] {
        TrainConfig config;
        config.seq_len = params->seq_len;
        config.batch_size = params->batch_size;
        config.epochs = params->epochs;
        config.warmup_steps = params->warmup_steps;
        config.max_steps = params->max_steps;
        config.learning_rate = params->learning_rate;
        config.weight_decay = params->weight_decay;
        config.seed = params->seed;
        if (params->prompt_template != nullptr) config.prompt_template = params->prompt_template;

        EpochCallback on_epoch;
        if (params->on_epoch != nullptr) {
            on_epoch = [params](int epoch, double mean) {
                params->on_epoch(epoch, mean, params->user);
            };
        }
        TrainResult result = train(model->model, dataset->pairs, config, on_epoch);
        if (stats != nullptr) {
            stats->steps = result.steps;
            stats->final_loss = result.step_losses.empty() ? 0.0 : result.step_losses.back();
            stats->examples_used = static_cast<int64_t>(result.examples_used);
            stats->examples_skipped = static_cast<int64_t>(result.examples_skipped);
        }
    });
}

/* ---- generation ---- */

void lsi_generate_params_init(lsi_generate_params *params) {
    if (params == nullptr) return;
    std::memset(params, 0, sizeof(*params));
    params->max_new = 256;
}

lsi_status lsi_generate(lsi_model *model, const char *instruction,
                        const lsi_generate_params *params, char **out_text) {
    if (model == nullptr || instruction == nullptr || params == nullptr || out_text == nullptr) {
        return invalid("model, instruction, params and out_text must be non-NULL");
    }
    return guarded([&] {
        const char *tmpl =
            params->prompt_template != nullptr ? params->prompt_template : kDefaultPromptTemplate;
        std::string prompt = render_prompt(tmpl, instruction);
        std::vector<int> tokens;
        tokens.push_back(tok::BOS);
        for (int id : tok::encode(prompt)) tokens.push_back(id);
        tokens.push_back(tok::SEP);

        GenerateParams gen;
        gen.max_new = params->max_new;
        gen.temperature = params->temperature;
        gen.seed = params->seed;
        std::vector<int> completion = generate(model->model, tokens, gen);
        *out_text = dup_string(tok::decode(completion, /*strict=*/false));
    });
}

/* ---- evaluation ---- */

void lsi_eval_params_init(lsi_eval_params *params) {
    if (params == nullptr) return;
    std::memset(params, 0, sizeof(*params));
    params->n = 1;
    params->timeout_sec = 10.0;
    params->memory_bytes = 256ll << 20;
    params->output_cap = 8192;
    params->gen_max_new = 256;
}

lsi_status lsi_eval_run(lsi_model *model, const lsi_eval_params *params, lsi_report **out) {
    if (params == nullptr || params->problems_path == nullptr || out == nullptr) {
        return invalid("problems_path and out must be set");
    }
    if (model == nullptr && params->samples_path == nullptr) {
        return invalid("either a model or a samples_path is required");
    }
    return guarded([&] {
        std::vector<Problem> problems = read_problems(params->problems_path);

        EvalConfig config;
        config.n = params->n > 0 ? params->n : 1;
        if (params->ks != nullptr && params->ks_len > 0) {
            config.ks.assign(params->ks, params->ks + params->ks_len);
        }
        config.limits.timeout_sec = params->timeout_sec > 0 ? params->timeout_sec : 10.0;
        config.limits.memory_bytes =
            params->memory_bytes >= 0 ? static_cast<uint64_t>(params->memory_bytes) : 0;
        config.limits.output_cap =
            params->output_cap > 0 ? static_cast<size_t>(params->output_cap) : 8192;
        config.workers = params->workers;
        config.model_id = params->model_id != nullptr ? params->model_id : "local";
        config.runners = RunnerConfig::with_builtins();
        if (params->temp_root != nullptr) config.runners.temp_root = params->temp_root;
        for (int32_t i = 0; i < params->runner_count; i++) {
            config.runners.commands[params->runner_languages[i]] = params->runner_commands[i];
        }

        Generator generator;
        if (params->samples_path != nullptr) {
            auto samples = read_samples(params->samples_path);
            int need = config.n;
            std::string path = params->samples_path;
            generator = [samples, need, path](const Problem &p) {
                auto it = samples.find(p.id);
                if (it == samples.end() || static_cast<int>(it->second.size()) < need) {
                    fail(ErrorCode::invalid_argument,
                         path + " holds fewer than n completions for problem " + p.id);
                }
                return std::vector<std::string>(it->second.begin(), it->second.begin() + need);
            };
            config.generation_params = "samples_file=" + path;
        } else {
            Model *m = &model->model;
            int max_new = params->gen_max_new;
            double temperature = params->gen_temperature;
            uint64_t seed = params->gen_seed;
            int need = config.n;
            generator = [m, max_new, temperature, seed, need](const Problem &p) {
                std::string prompt = render_prompt(kDefaultPromptTemplate, p.prompt);
                std::vector<int> tokens;
                tokens.push_back(tok::BOS);
                for (int id : tok::encode(prompt)) tokens.push_back(id);
                tokens.push_back(tok::SEP);
                std::vector<std::string> out;
                for (int s = 0; s < need; s++) {
                    GenerateParams gen;
                    gen.max_new = max_new;
                    gen.temperature = temperature;
                    uint64_t id_hash = mix64(std::hash<std::string>{}(p.id));
                    gen.seed = mix64(seed ^ id_hash) + static_cast<uint64_t>(s);
                    out.push_back(tok::decode(generate(*m, tokens, gen), /*strict=*/false));
                }
                return out;
            };
            config.generation_params =
                "max_new=" + std::to_string(max_new) +
                " temperature=" + std::to_string(temperature) + " seed=" + std::to_string(seed);
        }

        *out = new lsi_report{evaluate(problems, generator, config)};
    });
}

lsi_status lsi_report_table(const lsi_report *report, char **out_text) {
    if (report == nullptr || out_text == nullptr) return invalid("report and out must be non-NULL");
    return guarded([&] { *out_text = dup_string(render_report_table(report->report)); });
}

lsi_status lsi_report_json(const lsi_report *report, char **out_text) {
    if (report == nullptr || out_text == nullptr) return invalid("report and out must be non-NULL");
    return guarded([&] { *out_text = dup_string(report_to_json(report->report).dump(2)); });
}

lsi_status lsi_report_save_json(const lsi_report *report, const char *path) {
    if (report == nullptr || path == nullptr) return invalid("report and path must be non-NULL");
    return guarded([&] { write_report_json(report->report, path); });
}

lsi_status lsi_report_aggregate(const lsi_report *report, int32_t k, double *out) {
    if (report == nullptr || out == nullptr) return invalid("report and out must be non-NULL");
    auto it = report->report.aggregate.find(k);
    if (it == report->report.aggregate.end()) {
        g_last_error = "pass@" + std::to_string(k) + " was not computed for this report";
        return LSI_ERR_INVALID_ARGUMENT;
    }
    *out = it->second;
    return LSI_OK;
}

int64_t lsi_report_problem_count(const lsi_report *report) {
    return report == nullptr ? 0 : static_cast<int64_t>(report->report.problems.size());
}

int64_t lsi_report_setup_error_count(const lsi_report *report) {
    if (report == nullptr) return 0;
    int64_t count = 0;
    for (const ProblemResult &r : report->report.problems) {
        for (const Verdict &v : r.verdicts) {
            if (v.outcome == Outcome::setup_error) count++;
        }
    }
    return count;
}

void lsi_report_free(lsi_report *report) { delete report; }

} // extern "C"
