/*
 * lsi — C API for the desk-scale instruction-tuning toolkit.
 *
 * All functions return lsi_status (LSI_OK on success) unless stated
 * otherwise; on failure lsi_last_error() holds a thread-local message.
 * Handles are opaque and owned by the caller via the matching *_free().
 * Strings returned through char** are released with lsi_string_free().
 */
#ifndef LSI_H
#define LSI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LSI_API __declspec(dllexport)
#else
#define LSI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsi_status {
    LSI_OK = 0,
    LSI_ERR_INVALID_ARGUMENT = 1,
    LSI_ERR_IO = 2,
    LSI_ERR_PARSE = 3,
    LSI_ERR_STATE = 4,
    LSI_ERR_CHECKSUM = 5,
    LSI_ERR_NUMERIC = 6,
    LSI_ERR_INTERNAL = 7,
} lsi_status;

typedef struct lsi_model lsi_model;
typedef struct lsi_dataset lsi_dataset;
typedef struct lsi_report lsi_report;

LSI_API const char *lsi_version(void);
/* Message for the most recent failure on this thread; never NULL. */
LSI_API const char *lsi_last_error(void);
LSI_API void lsi_string_free(char *s);

/* ---- model ---- */

typedef struct lsi_model_params {
    int32_t vocab_size;
    int32_t d_model;
    int32_t n_heads;
    int32_t n_layers;
    int32_t d_ff;
    int32_t max_seq_len;
    uint64_t seed;
} lsi_model_params;

/* Desk-scale defaults: vocab 260, d_model 64, 2 heads, 2 layers, d_ff 128,
 * max_seq_len 512, seed 0. */
LSI_API void lsi_model_params_init(lsi_model_params *params);

LSI_API lsi_status lsi_model_create(const lsi_model_params *params, lsi_model **out);
LSI_API lsi_status lsi_model_load(const char *path, lsi_model **out);
LSI_API lsi_status lsi_model_save(const lsi_model *model, const char *path);
LSI_API void lsi_model_free(lsi_model *model);

LSI_API int lsi_model_has_adapters(const lsi_model *model);
/* total includes adapter parameters; adapters is 0 when none are attached */
LSI_API lsi_status lsi_model_param_counts(const lsi_model *model, int64_t *total,
                                          int64_t *adapters);

/* ---- low-rank adapters ---- */

typedef struct lsi_lora_params {
    int32_t rank;
    double alpha;
    double dropout;
    const char *targets; /* subset of "qkvo", e.g. "kv" */
} lsi_lora_params;

/* Defaults: rank 16, alpha 32, dropout 0.05, targets "kv". */
LSI_API void lsi_lora_params_init(lsi_lora_params *params);

LSI_API lsi_status lsi_model_attach_adapters(lsi_model *model, const lsi_lora_params *params,
                                             uint64_t init_seed);
/* Folds adapters into the base weights and removes them. */
LSI_API lsi_status lsi_model_merge_adapters(lsi_model *model);
/* Adapter parameters / total parameters; LSI_ERR_STATE without adapters. */
LSI_API lsi_status lsi_model_trainable_fraction(const lsi_model *model, double *out);

/* ---- dataset pipeline ---- */

typedef struct lsi_dataset_build_params {
    const char *corpus_dir;
    const char *extension;   /* NULL -> ".ts" */
    int64_t sample_n;        /* 0 -> whole corpus */
    uint64_t seed;
    const char *out_path;    /* JSON Lines output */
    int32_t workers;         /* <= 0 -> 4 */
    int32_t use_mock_client; /* nonzero -> deterministic offline client */
    const char *endpoint;    /* NULL -> LSI_GEN_ENDPOINT */
    const char *auth_token;  /* NULL -> LSI_GEN_TOKEN */
} lsi_dataset_build_params;

LSI_API void lsi_dataset_build_params_init(lsi_dataset_build_params *params);

typedef struct lsi_dataset_build_stats {
    int64_t snippets_ingested;
    int64_t snippets_sampled;
    int64_t pairs_written;
    int64_t pairs_dropped;
    int64_t snippets_skipped;
} lsi_dataset_build_stats;

LSI_API lsi_status lsi_dataset_build(const lsi_dataset_build_params *params,
                                     lsi_dataset_build_stats *stats);

LSI_API lsi_status lsi_dataset_open(const char *jsonl_path, lsi_dataset **out);
LSI_API int64_t lsi_dataset_size(const lsi_dataset *dataset);
LSI_API void lsi_dataset_free(lsi_dataset *dataset);

/* ---- training ---- */

typedef void (*lsi_epoch_callback)(int32_t epoch, double mean_loss, void *user);

typedef struct lsi_train_params {
    int32_t seq_len;      /* 512 */
    int32_t batch_size;   /* 16 */
    int32_t epochs;       /* 5 */
    int32_t warmup_steps; /* 50 */
    int32_t max_steps;    /* 0 = run all epochs */
    double learning_rate; /* 0.0002 */
    double weight_decay;  /* 0.01 */
    uint64_t seed;
    const char *prompt_template; /* NULL -> built-in default */
    lsi_epoch_callback on_epoch; /* optional */
    void *user;
} lsi_train_params;

LSI_API void lsi_train_params_init(lsi_train_params *params);

typedef struct lsi_train_stats {
    int32_t steps;
    double final_loss;
    int64_t examples_used;
    int64_t examples_skipped;
} lsi_train_stats;

/* Requires adapters attached; only adapter parameters are updated. */
LSI_API lsi_status lsi_train(lsi_model *model, const lsi_dataset *dataset,
                             const lsi_train_params *params, lsi_train_stats *stats);

/* ---- generation ---- */

typedef struct lsi_generate_params {
    int32_t max_new;    /* 256 */
    double temperature; /* 0 = greedy */
    uint64_t seed;
    const char *prompt_template; /* NULL -> built-in default */
} lsi_generate_params;

LSI_API void lsi_generate_params_init(lsi_generate_params *params);

/* Wraps the instruction in the prompt template and samples a completion. */
LSI_API lsi_status lsi_generate(lsi_model *model, const char *instruction,
                                const lsi_generate_params *params, char **out_text);

/* ---- evaluation ---- */

typedef struct lsi_eval_params {
    const char *problems_path; /* JSON Lines {id,prompt,tests,entry_point,language} */
    const char *samples_path;  /* JSON Lines {id,completion}; NULL -> model generates */
    int32_t n;
    const int32_t *ks;
    int32_t ks_len;            /* 0 -> pass@1 only */
    double timeout_sec;        /* 10 */
    int64_t memory_bytes;      /* 256 MiB, 0 disables the limit */
    int64_t output_cap;        /* 8192 */
    int32_t workers;           /* 0 -> logical cores */
    const char *temp_root;     /* NULL -> system temp dir */
    const char *const *runner_languages; /* extra runners on top of builtin "toy" */
    const char *const *runner_commands;  /* templates containing {file} */
    int32_t runner_count;
    int32_t gen_max_new;    /* 256, model-backed runs only */
    double gen_temperature; /* 0 */
    uint64_t gen_seed;
    const char *model_id; /* label for the report; NULL -> "local" */
} lsi_eval_params;

LSI_API void lsi_eval_params_init(lsi_eval_params *params);

/* model may be NULL when samples_path supplies the completions. */
LSI_API lsi_status lsi_eval_run(lsi_model *model, const lsi_eval_params *params,
                                lsi_report **out);

LSI_API lsi_status lsi_report_table(const lsi_report *report, char **out_text);
LSI_API lsi_status lsi_report_json(const lsi_report *report, char **out_text);
LSI_API lsi_status lsi_report_save_json(const lsi_report *report, const char *path);
LSI_API lsi_status lsi_report_aggregate(const lsi_report *report, int32_t k, double *out);
LSI_API int64_t lsi_report_problem_count(const lsi_report *report);
/* Verdicts that were setup errors (e.g. missing runners), for warnings. */
LSI_API int64_t lsi_report_setup_error_count(const lsi_report *report);
LSI_API void lsi_report_free(lsi_report *report);

#ifdef __cplusplus
}
#endif

#endif /* LSI_H */
