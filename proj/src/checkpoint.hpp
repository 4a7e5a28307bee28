#pragma once

#include <string>

#include "model.hpp"

namespace lsi {

// Checkpoint container: little-endian, magic "LSIF", version, length-prefixed
// JSON config, named tensor records, SHA-256 trailer over everything before
// it. Adapter bundles reuse the same container with kind "adapters".
constexpr uint32_t kCheckpointVersion = 1;

void save_model(const Model &model, const std::string &path);
Model load_model(const std::string &path);

void save_adapter_bundle(const AdapterBundle &bundle, const ModelConfig &owner,
                         const std::string &path);
AdapterBundle load_adapter_bundle(const std::string &path, ModelConfig *owner = nullptr);

} // namespace lsi
