#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace lsi {

struct Model;

enum class LoraTarget : uint8_t { Q = 0, K = 1, V = 2, O = 3 };

const char *lora_target_name(LoraTarget t);
// Parses strings like "kv", "qkvo", "KV"; order and duplicates are normalized.
std::vector<LoraTarget> parse_lora_targets(const std::string &letters);

struct LoraConfig {
    int rank = 16;
    double alpha = 32.0;
    double dropout = 0.05;
    std::vector<LoraTarget> targets = {LoraTarget::K, LoraTarget::V};

    double merge_scale() const { return alpha / rank; }
    bool targets_include(LoraTarget t) const;
    std::string targets_str() const;
};

// One low-rank factor pair wrapping a frozen base matrix. The effective
// weight in evaluation mode is base + (alpha / rank) * a * b.
struct LoraAdapter {
    int layer = 0;
    LoraTarget target = LoraTarget::K;
    Matrix a; // in x rank, Gaussian(0, 0.02) at attach
    Matrix b; // rank x out, zero at attach
};

struct AdapterBundle {
    LoraConfig config;
    std::vector<LoraAdapter> adapters; // layer-major, targets in Q,K,V,O order

    const LoraAdapter *find(int layer, LoraTarget target) const;
    int64_t param_count() const;
};

// Wraps every targeted attention matrix in every layer. Base weights stay
// untouched; immediately after attach the adapted forward equals the base
// forward because b is zero.
void lora_attach(Model &model, const LoraConfig &config, uint64_t init_seed = 0);

// Re-attach a previously detached bundle (shapes must match the model).
void lora_attach_bundle(Model &model, AdapterBundle bundle);

// Folds each adapter into its base matrix and removes the adapters.
void lora_merge(Model &model);

// Removes the adapters, returning them; base weights are bit-identical to
// their pre-attach values.
AdapterBundle lora_detach(Model &model);

// Adapter parameters over total parameters (adapter + base).
double lora_trainable_fraction(const Model &model);

// Closed form sum of rank * (in + out) over targeted matrices.
int64_t lora_param_count_formula(int d_model, int n_layers, int rank, size_t n_targets);

} // namespace lsi
