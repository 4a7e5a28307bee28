#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "model.hpp"

namespace lsi {

// Default instruction prompt wrapper; {instruction} is substituted in.
extern const char *kDefaultPromptTemplate;

struct TrainConfig {
    int seq_len = 512;
    int batch_size = 16;
    int epochs = 5;
    double learning_rate = 0.0002;
    int warmup_steps = 50;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    int max_steps = 0; // 0 = epochs decide; otherwise a hard cap
    std::string prompt_template = kDefaultPromptTemplate;
    LoraConfig lora; // applied by callers when attaching adapters

    void validate() const;
};

// lr(t) = peak * min(1, t / warmup) for 1-based step t, constant afterwards.
double warmup_lr(double peak, int warmup_steps, int step);

std::string render_prompt(const std::string &template_text, const std::string &instruction);

struct TrainExample {
    std::vector<int> inputs;    // sequence fed to the model
    std::vector<int> targets;   // inputs shifted left by one
    std::vector<uint8_t> mask;  // 1 where the target belongs to output + EOS
    size_t dataset_index = 0;
};

// Tokenizes BOS + prompt + SEP + output + EOS, truncated to seq_len. Returns
// nothing (with a reason) when the prompt span leaves no output target.
std::optional<TrainExample> build_example(const InstructionPair &pair,
                                          const std::string &template_text, int seq_len,
                                          std::string *skip_reason = nullptr);

struct TrainResult {
    std::vector<double> step_losses;       // one entry per optimizer step
    std::vector<double> epoch_mean_losses; // one entry per completed epoch
    int steps = 0;
    size_t examples_used = 0;
    size_t examples_skipped = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Instruction-tunes the model in place. Adapters must already be attached;
// only adapter parameters move. Deterministic for a fixed
// (model, dataset, config) triple. A non-finite loss aborts with the step
// number in the message.
TrainResult train(Model &model, const std::vector<InstructionPair> &dataset,
                  const TrainConfig &config, const EpochCallback &on_epoch = {});

} // namespace lsi
