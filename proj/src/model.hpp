#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "lora.hpp"
#include "matrix.hpp"
#include "tokenizer.hpp"

namespace lsi {

struct ModelConfig {
    int vocab_size = tok::VOCAB_SIZE;
    int d_model = 64;
    int n_heads = 2;
    int n_layers = 2;
    int d_ff = 128;
    int max_seq_len = 512;
    uint64_t seed = 0;

    void validate() const;
    int head_dim() const { return d_model / n_heads; }
};

struct LayerWeights {
    Matrix norm1_gain, norm1_bias; // 1 x d
    Matrix wq, wk, wv, wo;         // d x d, no biases
    Matrix norm2_gain, norm2_bias; // 1 x d
    Matrix ff1_w;                  // d x d_ff
    Matrix ff1_b;                  // 1 x d_ff
    Matrix ff2_w;                  // d_ff x d
    Matrix ff2_b;                  // 1 x d
};

// Pre-norm causal decoder: learned token + position embeddings, n_layers of
// (attention, feed-forward) with residuals, untied output projection applied
// to the raw residual stream (no trailing norm).
struct Model {
    ModelConfig config;
    Matrix tok_embed; // vocab x d
    Matrix pos_embed; // max_seq_len x d
    std::vector<LayerWeights> layers;
    Matrix head; // d x vocab, applied straight to the residual stream
    std::optional<AdapterBundle> lora;

    static Model init(const ModelConfig &config);

    bool has_lora() const { return lora.has_value(); }
    int64_t base_param_count() const;
    int64_t adapter_param_count() const { return lora ? lora->param_count() : 0; }
    int64_t total_param_count() const { return base_param_count() + adapter_param_count(); }
};

// Named reference to one weight matrix, adapters included; the enumeration
// order is fixed and doubles as the checkpoint tensor order.
struct NamedParam {
    std::string name;
    Matrix *matrix;
    bool is_adapter;
};
std::vector<NamedParam> named_params(Model &model);

struct ForwardOptions {
    bool training = false; // enables adapter dropout
    bool trainable = false; // register trainable leaves (adapters when attached, else all)
    uint64_t dropout_seed = 0;
    uint64_t step = 0;
    uint64_t example_index = 0;
};

// Registers the model's weights as leaves on one tape and runs forward
// passes against them; several sequences may share one BoundModel so weight
// leaves (and their gradients) are shared within a batch.
class BoundModel {
  public:
    BoundModel(Tape &tape, Model &model, const ForwardOptions &opts);

    // tokens -> logits (len x vocab); validates length and id range.
    Value forward(const std::vector<int> &tokens, uint64_t example_index = 0);

    // (param, leaf) pairs for every trainable leaf, enumeration order.
    const std::vector<std::pair<NamedParam, Value>> &trainable_leaves() const {
        return trainable_;
    }

  private:
    Value leaf_for(Matrix &m, const std::string &name, bool is_adapter);
    Value project(Value x, int layer, LoraTarget target, uint64_t example_index);

    Tape &tape_;
    Model &model_;
    ForwardOptions opts_;
    std::vector<std::pair<std::string, Value>> leaves_;
    std::vector<std::pair<NamedParam, Value>> trainable_;
};

// One-off forward pass for inference and tests.
Matrix model_forward(Model &model, const std::vector<int> &tokens);

struct GenerateParams {
    int max_new = 256;
    double temperature = 0.0; // 0 = greedy argmax
    uint64_t seed = 0;
    int stop_token = tok::EOS;
};

// Samples up to max_new tokens after the prompt; the stop token is consumed
// but not returned. temperature 0 is fully deterministic.
std::vector<int> generate(Model &model, const std::vector<int> &prompt,
                          const GenerateParams &params);

} // namespace lsi
