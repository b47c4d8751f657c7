#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "catse/model_config.hpp"
#include "catse/tensor.hpp"

namespace catse {

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

// Named parameter collection plus the configuration that determines its
// name set. std::map keeps names in canonical order.
struct ModelWeights {
  std::uint32_t format_version = kWeightsFormatVersion;
  ModelConfig config;
  std::map<std::string, Tensor> params;

  std::size_t parameter_count(bool include_heads = true) const;
  // Deep copy; the result shares no storage with *this.
  ModelWeights clone() const;
};

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), for conv
// and FC weights; zero biases; unit cgLN gains; PReLU slopes at 0.25. Each
// parameter draws from its own stream keyed by (seed, name), so variants
// share identical trunk initializations.
ModelWeights initialize_weights(const ModelConfig& config, std::uint64_t seed);

enum class LoadMode {
  training,   // full name set, heads included
  inference,  // head parameters are skipped if present
};

// Checkpoint layout (all integers little-endian):
//   "CATSEW1\0"
//   u32 metadata length, metadata JSON {"config":..., "variant":..., "version":...}
//   u32 parameter count, then per parameter:
//     u32 name length, name bytes, u32 rank, u32 dims[rank], f32 values[]
std::string serialize_weights(const ModelWeights& weights);
ModelWeights deserialize_weights(std::string_view bytes, LoadMode mode = LoadMode::inference);

void save_weights(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path, LoadMode mode = LoadMode::inference);

}  // namespace catse
