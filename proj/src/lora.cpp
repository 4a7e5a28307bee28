#include "lora.hpp"

#include <algorithm>

#include "model.hpp"

namespace lsi {

const char *lora_target_name(LoraTarget t) {
    switch (t) {
    case LoraTarget::Q: return "q";
    case LoraTarget::K: return "k";
    case LoraTarget::V: return "v";
    case LoraTarget::O: return "o";
    }
    return "?";
}

std::vector<LoraTarget> parse_lora_targets(const std::string &letters) {
    bool seen[4] = {false, false, false, false};
    for (char c : letters) {
        switch (c) {
        case 'q': case 'Q': seen[0] = true; break;
        case 'k': case 'K': seen[1] = true; break;
        case 'v': case 'V': seen[2] = true; break;
        case 'o': case 'O': seen[3] = true; break;
        case ',': case ' ': break;
        default:
            fail(ErrorCode::invalid_argument,
                 "unknown adapter target '" + std::string(1, c) + "' (expected q, k, v, o)");
        }
    }
    std::vector<LoraTarget> out;
    for (int i = 0; i < 4; i++) {
        if (seen[i]) out.push_back(static_cast<LoraTarget>(i));
    }
    return out;
}

bool LoraConfig::targets_include(LoraTarget t) const {
    return std::find(targets.begin(), targets.end(), t) != targets.end();
}

std::string LoraConfig::targets_str() const {
    std::string out;
    for (LoraTarget t : targets) out += lora_target_name(t);
    return out;
}

const LoraAdapter *AdapterBundle::find(int layer, LoraTarget target) const {
    for (const LoraAdapter &ad : adapters) {
        if (ad.layer == layer && ad.target == target) return &ad;
    }
    return nullptr;
}

int64_t AdapterBundle::param_count() const {
    int64_t total = 0;
    for (const LoraAdapter &ad : adapters) {
        total += static_cast<int64_t>(ad.a.size()) + static_cast<int64_t>(ad.b.size());
    }
    return total;
}

namespace {

LoraConfig normalized(const LoraConfig &config, const Model &model) {
    LoraConfig cfg = config;
    std::sort(cfg.targets.begin(), cfg.targets.end());
    cfg.targets.erase(std::unique(cfg.targets.begin(), cfg.targets.end()), cfg.targets.end());
    if (cfg.targets.empty()) {
        fail(ErrorCode::invalid_argument, "adapter targets must be non-empty");
    }
    if (cfg.rank < 1 || cfg.rank > model.config.d_model) {
        fail(ErrorCode::invalid_argument,
             "adapter rank " + std::to_string(cfg.rank) + " invalid for d_model " +
                 std::to_string(model.config.d_model));
    }
    if (cfg.alpha <= 0.0) fail(ErrorCode::invalid_argument, "adapter alpha must be positive");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        fail(ErrorCode::invalid_argument, "adapter dropout must be in [0, 1)");
    }
    return cfg;
}

} // namespace

void lora_attach(Model &model, const LoraConfig &config, uint64_t init_seed) {
    if (model.has_lora()) {
        fail(ErrorCode::state, "adapters already attached");
    }
    LoraConfig cfg = normalized(config, model);
    Rng rng(mix64(model.config.seed ^ 0x6c6f7261ull) ^ init_seed);

    AdapterBundle bundle;
    bundle.config = cfg;
    int d = model.config.d_model;
    for (int layer = 0; layer < model.config.n_layers; layer++) {
        for (LoraTarget t : cfg.targets) {
            LoraAdapter ad;
            ad.layer = layer;
            ad.target = t;
            ad.a = Matrix::gaussian(d, cfg.rank, 0.0, 0.02, rng);
            ad.b = Matrix(cfg.rank, d); // zero: adapted forward == base forward
            bundle.adapters.push_back(std::move(ad));
        }
    }
    model.lora = std::move(bundle);
}

void lora_attach_bundle(Model &model, AdapterBundle bundle) {
    if (model.has_lora()) {
        fail(ErrorCode::state, "adapters already attached");
    }
    normalized(bundle.config, model);
    int d = model.config.d_model;
    for (const LoraAdapter &ad : bundle.adapters) {
        if (ad.layer < 0 || ad.layer >= model.config.n_layers || ad.a.rows != d ||
            ad.a.cols != bundle.config.rank || ad.b.rows != bundle.config.rank ||
            ad.b.cols != d) {
            fail(ErrorCode::invalid_argument, "adapter bundle does not fit this model");
        }
    }
    model.lora = std::move(bundle);
}

void lora_merge(Model &model) {
    if (!model.has_lora()) {
        fail(ErrorCode::state, "merge requires attached adapters");
    }
    double s = model.lora->config.merge_scale();
    for (const LoraAdapter &ad : model.lora->adapters) {
        Matrix delta = scale(matmul(ad.a, ad.b), s);
        LayerWeights &l = model.layers[ad.layer];
        switch (ad.target) {
        case LoraTarget::Q: l.wq = add(l.wq, delta); break;
        case LoraTarget::K: l.wk = add(l.wk, delta); break;
        case LoraTarget::V: l.wv = add(l.wv, delta); break;
        case LoraTarget::O: l.wo = add(l.wo, delta); break;
        }
    }
    model.lora.reset();
}

AdapterBundle lora_detach(Model &model) {
    if (!model.has_lora()) {
        fail(ErrorCode::state, "detach requires attached adapters");
    }
    AdapterBundle bundle = std::move(*model.lora);
    model.lora.reset();
    return bundle;
}

double lora_trainable_fraction(const Model &model) {
    if (!model.has_lora()) {
        fail(ErrorCode::state, "trainable fraction requires attached adapters");
    }
    double adapter = static_cast<double>(model.adapter_param_count());
    return adapter / static_cast<double>(model.total_param_count());
}

int64_t lora_param_count_formula(int d_model, int n_layers, int rank, size_t n_targets) {
    // rank * (in + out) per wrapped matrix
    return static_cast<int64_t>(n_layers) * static_cast<int64_t>(n_targets) * rank *
           (static_cast<int64_t>(d_model) + d_model);
}

} // namespace lsi
