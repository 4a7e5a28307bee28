#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "tokenizer.hpp"

namespace lsi {

const char *kDefaultPromptTemplate =
    "Using the instruction context below, generate a TypeScript code that answers the "
    "question and explains it: {instruction}";

void TrainConfig::validate() const {
    if (seq_len < 4) fail(ErrorCode::invalid_argument, "seq_len too small");
    if (batch_size < 1 || epochs < 1 || warmup_steps < 1) {
        fail(ErrorCode::invalid_argument, "batch_size, epochs and warmup_steps must be positive");
    }
    if (learning_rate <= 0.0) fail(ErrorCode::invalid_argument, "learning rate must be positive");
    if (max_steps < 0) fail(ErrorCode::invalid_argument, "max_steps must be >= 0");
}

double warmup_lr(double peak, int warmup_steps, int step) {
    double ramp = static_cast<double>(step) / warmup_steps;
    return peak * std::min(1.0, ramp);
}

std::string render_prompt(const std::string &template_text, const std::string &instruction) {
    const std::string placeholder = "{instruction}";
    size_t pos = template_text.find(placeholder);
    if (pos == std::string::npos) {
        fail(ErrorCode::invalid_argument, "prompt template is missing {instruction}");
    }
    std::string out = template_text;
    while (pos != std::string::npos) {
        out.replace(pos, placeholder.size(), instruction);
        pos = out.find(placeholder, pos + instruction.size());
    }
    return out;
}

std::optional<TrainExample> build_example(const InstructionPair &pair,
                                          const std::string &template_text, int seq_len,
                                          std::string *skip_reason) {
    std::string prompt = render_prompt(template_text, pair.instruction);
    std::vector<int> prompt_ids = tok::encode(prompt);
    std::vector<int> output_ids = tok::encode(pair.output);

    std::vector<int> tokens;
    tokens.reserve(prompt_ids.size() + output_ids.size() + 3);
    tokens.push_back(tok::BOS);
    tokens.insert(tokens.end(), prompt_ids.begin(), prompt_ids.end());
    tokens.push_back(tok::SEP);
    size_t prompt_span = tokens.size(); // BOS + prompt + SEP
    tokens.insert(tokens.end(), output_ids.begin(), output_ids.end());
    tokens.push_back(tok::EOS);
    tokens = tok::truncate(std::move(tokens), static_cast<size_t>(seq_len));

    // targets are tokens shifted left; target index j answers position j-1
    if (tokens.size() < 2 || prompt_span >= tokens.size()) {
        if (skip_reason != nullptr) {
            *skip_reason = "prompt occupies the whole sequence budget (" +
                           std::to_string(prompt_span) + " of " + std::to_string(seq_len) + ")";
        }
        return std::nullopt;
    }

    TrainExample ex;
    ex.inputs.assign(tokens.begin(), tokens.end() - 1);
    ex.targets.assign(tokens.begin() + 1, tokens.end());
    ex.mask.resize(ex.targets.size());
    for (size_t j = 1; j < tokens.size(); j++) {
        ex.mask[j - 1] = j >= prompt_span ? 1 : 0;
    }
    return ex;
}

namespace {

struct AdamSlot {
    Matrix m;
    Matrix v;
};

} // namespace

TrainResult train(Model &model, const std::vector<InstructionPair> &dataset,
                  const TrainConfig &config, const EpochCallback &on_epoch) {
    config.validate();
    if (dataset.empty()) fail(ErrorCode::invalid_argument, "training dataset is empty");
    if (!model.has_lora()) {
        fail(ErrorCode::state, "training requires attached adapters");
    }

    TrainResult result;
    std::vector<TrainExample> examples;
    for (size_t i = 0; i < dataset.size(); i++) {
        std::string reason;
        auto ex = build_example(dataset[i], config.prompt_template, config.seq_len, &reason);
        if (ex) {
            ex->dataset_index = i;
            examples.push_back(std::move(*ex));
        } else {
            result.examples_skipped++;
        }
    }
    if (examples.empty()) {
        fail(ErrorCode::invalid_argument, "no usable examples after tokenization");
    }
    result.examples_used = examples.size();

    // Bucket by length so batches hold similar-sized sequences, then shuffle
    // batch order each epoch.
    std::stable_sort(examples.begin(), examples.end(),
                     [](const TrainExample &a, const TrainExample &b) {
                         return a.inputs.size() < b.inputs.size();
                     });
    size_t n_batches = (examples.size() + config.batch_size - 1) / config.batch_size;

    std::map<std::string, AdamSlot> adam;
    int step = 0;
    bool stop = false;
    for (int epoch = 0; epoch < config.epochs && !stop; epoch++) {
        std::vector<size_t> batch_order(n_batches);
        std::iota(batch_order.begin(), batch_order.end(), size_t{0});
        Rng shuffle_rng(mix64(config.seed ^ 0x65706f63ull) + epoch);
        for (size_t i = batch_order.size(); i > 1; i--) {
            std::swap(batch_order[i - 1], batch_order[shuffle_rng.below(i)]);
        }

        double epoch_loss = 0.0;
        int epoch_steps = 0;
        for (size_t bi : batch_order) {
            size_t begin = bi * config.batch_size;
            size_t end = std::min(begin + config.batch_size, examples.size());
            step++;

            Tape tape;
            ForwardOptions opts;
            opts.training = true;
            opts.trainable = true;
            opts.dropout_seed = config.seed;
            opts.step = static_cast<uint64_t>(step);
            BoundModel bound(tape, model, opts);

            Value total{};
            for (size_t e = begin; e < end; e++) {
                const TrainExample &ex = examples[e];
                Value logits = bound.forward(ex.inputs, ex.dataset_index);
                Value ce = tape.cross_entropy(logits, ex.targets, ex.mask);
                total = e == begin ? ce : tape.add(total, ce);
            }
            Value loss = tape.scale(total, 1.0 / static_cast<double>(end - begin));

            double loss_value = tape.scalar_value(loss);
            if (!std::isfinite(loss_value)) {
                fail(ErrorCode::numeric,
                     "non-finite loss at optimizer step " + std::to_string(step));
            }

            GradStore grads = tape.backward(loss);
            double lr = warmup_lr(config.learning_rate, config.warmup_steps, step);
            double bc1 = 1.0 - std::pow(config.beta1, step);
            double bc2 = 1.0 - std::pow(config.beta2, step);
            for (const auto &[param, leaf] : bound.trainable_leaves()) {
                const Matrix &g = grads.at(leaf);
                AdamSlot &slot = adam[param.name];
                if (slot.m.empty()) {
                    slot.m = Matrix(g.rows, g.cols);
                    slot.v = Matrix(g.rows, g.cols);
                }
                Matrix &w = *param.matrix;
                for (size_t i = 0; i < w.data.size(); i++) {
                    double gi = g.data[i];
                    slot.m.data[i] = config.beta1 * slot.m.data[i] + (1.0 - config.beta1) * gi;
                    slot.v.data[i] =
                        config.beta2 * slot.v.data[i] + (1.0 - config.beta2) * gi * gi;
                    double m_hat = slot.m.data[i] / bc1;
                    double v_hat = slot.v.data[i] / bc2;
                    w.data[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.adam_eps) +
                                       config.weight_decay * w.data[i]);
                }
            }

            result.step_losses.push_back(loss_value);
            epoch_loss += loss_value;
            epoch_steps++;
            if (config.max_steps > 0 && step >= config.max_steps) {
                stop = true;
                break;
            }
        }
        if (epoch_steps > 0) {
            double mean = epoch_loss / epoch_steps;
            result.epoch_mean_losses.push_back(mean);
            if (on_epoch) on_epoch(epoch + 1, mean);
        }
    }
    result.steps = step;
    return result;
}

} // namespace lsi
