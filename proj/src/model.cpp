#include "model.hpp"

#include <algorithm>
#include <cmath>

namespace lsi {

void ModelConfig::validate() const {
    if (vocab_size < 1 || d_model < 1 || n_heads < 1 || n_layers < 1 || d_ff < 1 ||
        max_seq_len < 1) {
        fail(ErrorCode::invalid_argument, "model config counts must be positive");
    }
    if (d_model % n_heads != 0) {
        fail(ErrorCode::invalid_argument,
             "d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                 std::to_string(n_heads));
    }
}

Model Model::init(const ModelConfig &config) {
    config.validate();
    Rng rng(config.seed);
    // wide enough that positions are separable at init, small enough that
    // initial logits stay near-uniform
    double std_embed = 0.08;
    double std_proj = 0.08;

    Model m;
    m.config = config;
    m.tok_embed = Matrix::gaussian(config.vocab_size, config.d_model, 0.0, std_embed, rng);
    m.pos_embed = Matrix::gaussian(config.max_seq_len, config.d_model, 0.0, std_embed, rng);
    m.layers.resize(config.n_layers);
    for (auto &layer : m.layers) {
        layer.norm1_gain = Matrix::full(1, config.d_model, 1.0);
        layer.norm1_bias = Matrix(1, config.d_model);
        layer.wq = Matrix::gaussian(config.d_model, config.d_model, 0.0, std_proj, rng);
        layer.wk = Matrix::gaussian(config.d_model, config.d_model, 0.0, std_proj, rng);
        layer.wv = Matrix::gaussian(config.d_model, config.d_model, 0.0, std_proj, rng);
        layer.wo = Matrix::gaussian(config.d_model, config.d_model, 0.0, std_proj, rng);
        layer.norm2_gain = Matrix::full(1, config.d_model, 1.0);
        layer.norm2_bias = Matrix(1, config.d_model);
        layer.ff1_w = Matrix::gaussian(config.d_model, config.d_ff, 0.0, std_proj, rng);
        layer.ff1_b = Matrix(1, config.d_ff);
        layer.ff2_w = Matrix::gaussian(config.d_ff, config.d_model, 0.0, std_proj, rng);
        layer.ff2_b = Matrix(1, config.d_model);
    }
    m.head = Matrix::gaussian(config.d_model, config.vocab_size, 0.0, std_proj, rng);
    return m;
}

int64_t Model::base_param_count() const {
    const ModelConfig &c = config;
    int64_t d = c.d_model;
    int64_t per_layer = 4 * d * d          // q, k, v, o
                        + 4 * d            // two norms, gain + bias each
                        + d * c.d_ff + c.d_ff // ff1
                        + c.d_ff * d + d;  // ff2
    return static_cast<int64_t>(c.vocab_size) * d // token embedding
           + static_cast<int64_t>(c.max_seq_len) * d // position embedding
           + c.n_layers * per_layer
           + d * c.vocab_size;                      // output projection
}

std::vector<NamedParam> named_params(Model &model) {
    std::vector<NamedParam> out;
    out.push_back({"tok_embed", &model.tok_embed, false});
    out.push_back({"pos_embed", &model.pos_embed, false});
    for (size_t i = 0; i < model.layers.size(); i++) {
        LayerWeights &l = model.layers[i];
        std::string p = "layers." + std::to_string(i) + ".";
        out.push_back({p + "norm1.gain", &l.norm1_gain, false});
        out.push_back({p + "norm1.bias", &l.norm1_bias, false});
        out.push_back({p + "attn.wq", &l.wq, false});
        out.push_back({p + "attn.wk", &l.wk, false});
        out.push_back({p + "attn.wv", &l.wv, false});
        out.push_back({p + "attn.wo", &l.wo, false});
        out.push_back({p + "norm2.gain", &l.norm2_gain, false});
        out.push_back({p + "norm2.bias", &l.norm2_bias, false});
        out.push_back({p + "ffn.w1", &l.ff1_w, false});
        out.push_back({p + "ffn.b1", &l.ff1_b, false});
        out.push_back({p + "ffn.w2", &l.ff2_w, false});
        out.push_back({p + "ffn.b2", &l.ff2_b, false});
    }
    out.push_back({"head.w", &model.head, false});
    if (model.lora) {
        for (LoraAdapter &ad : model.lora->adapters) {
            std::string p = "layers." + std::to_string(ad.layer) + ".lora." +
                            lora_target_name(ad.target) + ".";
            out.push_back({p + "a", &ad.a, true});
            out.push_back({p + "b", &ad.b, true});
        }
    }
    return out;
}

BoundModel::BoundModel(Tape &tape, Model &model, const ForwardOptions &opts)
    : tape_(tape), model_(model), opts_(opts) {}

Value BoundModel::leaf_for(Matrix &m, const std::string &name, bool is_adapter) {
    for (const auto &[n, v] : leaves_) {
        if (n == name) return v;
    }
    // With adapters attached only adapter factors train; otherwise the whole
    // model does.
    bool trainable = opts_.trainable && (model_.has_lora() ? is_adapter : true);
    Value v = tape_.leaf(m, trainable);
    leaves_.emplace_back(name, v);
    if (trainable) {
        trainable_.push_back({NamedParam{name, &m, is_adapter}, v});
    }
    return v;
}

Value BoundModel::project(Value x, int layer, LoraTarget target, uint64_t example_index) {
    LayerWeights &l = model_.layers[layer];
    Matrix *base = nullptr;
    switch (target) {
    case LoraTarget::Q: base = &l.wq; break;
    case LoraTarget::K: base = &l.wk; break;
    case LoraTarget::V: base = &l.wv; break;
    case LoraTarget::O: base = &l.wo; break;
    }
    std::string prefix = "layers." + std::to_string(layer) + ".";
    std::string tname = lora_target_name(target);
    Value w = leaf_for(*base, prefix + "attn.w" + tname, false);
    Value out = tape_.matmul(x, w);

    LoraAdapter *adapter =
        model_.lora ? const_cast<LoraAdapter *>(model_.lora->find(layer, target)) : nullptr;
    if (adapter == nullptr) return out;

    const LoraConfig &cfg = model_.lora->config;
    // Dropout on the adapter input path only; the frozen base path stays
    // deterministic.
    uint64_t site = static_cast<uint64_t>(layer) * 4 + static_cast<uint64_t>(target);
    StatelessRng rng{opts_.dropout_seed,
                     mix64(site ^ mix64(opts_.step ^ mix64(example_index)))};
    Value xin = tape_.dropout(x, cfg.dropout, opts_.training, rng, 0);
    Value a = leaf_for(adapter->a, prefix + "lora." + tname + ".a", true);
    Value b = leaf_for(adapter->b, prefix + "lora." + tname + ".b", true);
    Value delta = tape_.matmul(tape_.matmul(xin, a), b);
    return tape_.add(out, tape_.scale(delta, cfg.merge_scale()));
}

Value BoundModel::forward(const std::vector<int> &tokens, uint64_t example_index) {
    const ModelConfig &c = model_.config;
    int len = static_cast<int>(tokens.size());
    if (len < 1) fail(ErrorCode::invalid_argument, "forward: empty token sequence");
    if (len > c.max_seq_len) {
        fail(ErrorCode::invalid_argument, "forward: sequence length " + std::to_string(len) +
                                              " exceeds max_seq_len " +
                                              std::to_string(c.max_seq_len));
    }
    for (int id : tokens) {
        if (id < 0 || id >= c.vocab_size) {
            fail(ErrorCode::invalid_argument,
                 "forward: token id " + std::to_string(id) + " outside vocab of " +
                     std::to_string(c.vocab_size));
        }
    }

    Value tok_table = leaf_for(model_.tok_embed, "tok_embed", false);
    Value pos_table = leaf_for(model_.pos_embed, "pos_embed", false);
    std::vector<int> positions(tokens.size());
    for (int t = 0; t < len; t++) positions[t] = t;

    Value x = tape_.add(tape_.embed_rows(tok_table, tokens),
                        tape_.embed_rows(pos_table, positions));

    int dk = c.head_dim();
    double attn_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    for (int li = 0; li < c.n_layers; li++) {
        LayerWeights &l = model_.layers[li];
        std::string p = "layers." + std::to_string(li) + ".";

        Value h = tape_.layernorm_rows(x);
        h = tape_.mul_rowvec(h, leaf_for(l.norm1_gain, p + "norm1.gain", false));
        h = tape_.add_rowvec(h, leaf_for(l.norm1_bias, p + "norm1.bias", false));

        Value q = project(h, li, LoraTarget::Q, example_index);
        Value k = project(h, li, LoraTarget::K, example_index);
        Value v = project(h, li, LoraTarget::V, example_index);

        std::vector<Value> heads;
        heads.reserve(c.n_heads);
        for (int hi = 0; hi < c.n_heads; hi++) {
            Value qh = tape_.slice_cols(q, hi * dk, (hi + 1) * dk);
            Value kh = tape_.slice_cols(k, hi * dk, (hi + 1) * dk);
            Value vh = tape_.slice_cols(v, hi * dk, (hi + 1) * dk);
            Value scores = tape_.scale(tape_.matmul_nt(qh, kh), attn_scale);
            Value probs = tape_.softmax_rows(scores, /*causal=*/true);
            heads.push_back(tape_.matmul(probs, vh));
        }
        Value ctx = c.n_heads == 1 ? heads[0] : tape_.concat_cols(heads);
        Value attn_out = project(ctx, li, LoraTarget::O, example_index);
        x = tape_.add(x, attn_out);

        Value h2 = tape_.layernorm_rows(x);
        h2 = tape_.mul_rowvec(h2, leaf_for(l.norm2_gain, p + "norm2.gain", false));
        h2 = tape_.add_rowvec(h2, leaf_for(l.norm2_bias, p + "norm2.bias", false));
        Value ff = tape_.matmul(h2, leaf_for(l.ff1_w, p + "ffn.w1", false));
        ff = tape_.add_rowvec(ff, leaf_for(l.ff1_b, p + "ffn.b1", false));
        ff = tape_.gelu(ff);
        ff = tape_.matmul(ff, leaf_for(l.ff2_w, p + "ffn.w2", false));
        ff = tape_.add_rowvec(ff, leaf_for(l.ff2_b, p + "ffn.b2", false));
        x = tape_.add(x, ff);
    }

    return tape_.matmul(x, leaf_for(model_.head, "head.w", false));
}

Matrix model_forward(Model &model, const std::vector<int> &tokens) {
    Tape tape;
    BoundModel bound(tape, model, ForwardOptions{});
    return tape.value(bound.forward(tokens));
}

std::vector<int> generate(Model &model, const std::vector<int> &prompt,
                          const GenerateParams &params) {
    const ModelConfig &c = model.config;
    if (params.max_new < 0) fail(ErrorCode::invalid_argument, "generate: max_new must be >= 0");
    if (prompt.empty()) fail(ErrorCode::invalid_argument, "generate: empty prompt");
    if (static_cast<int>(prompt.size()) + params.max_new > c.max_seq_len) {
        fail(ErrorCode::invalid_argument,
             "generate: prompt of " + std::to_string(prompt.size()) + " plus budget " +
                 std::to_string(params.max_new) + " exceeds max_seq_len " +
                 std::to_string(c.max_seq_len));
    }

    StatelessRng rng{params.seed, 0x67656e65ull}; // sampling stream
    std::vector<int> tokens = prompt;
    std::vector<int> completion;
    for (int step = 0; step < params.max_new; step++) {
        Matrix logits = model_forward(model, tokens);
        const double *row = logits.row(logits.rows - 1);

        int next = 0;
        if (params.temperature <= 0.0) {
            for (int j = 1; j < c.vocab_size; j++) {
                if (row[j] > row[next]) next = j;
            }
        } else {
            // stabilized categorical sample at the given temperature
            double mx = row[0];
            for (int j = 1; j < c.vocab_size; j++) mx = std::max(mx, row[j]);
            std::vector<double> p(c.vocab_size);
            double total = 0.0;
            for (int j = 0; j < c.vocab_size; j++) {
                p[j] = std::exp((row[j] - mx) / params.temperature);
                total += p[j];
            }
            double u = rng.uniform(static_cast<uint64_t>(step)) * total;
            double acc = 0.0;
            next = c.vocab_size - 1;
            for (int j = 0; j < c.vocab_size; j++) {
                acc += p[j];
                if (u < acc) {
                    next = j;
                    break;
                }
            }
        }
        if (next == params.stop_token) break;
        completion.push_back(next);
        tokens.push_back(next);
    }
    return completion;
}

} // namespace lsi
