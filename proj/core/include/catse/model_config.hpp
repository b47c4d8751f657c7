#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "catse/tensor.hpp"

namespace catse {

enum class Variant { pctcn, ecatse, icatse };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);

inline constexpr std::size_t kEmbeddingDim = 128;
inline constexpr std::size_t kDefaultClasses = 41;

// Classification heads attached to each TCN stack output (training only).
struct HeadConfig {
  std::size_t channels = 64;
  std::size_t kernel = 3;
  std::size_t blocks = 4;
  std::size_t pool = 4;
  std::size_t fc_hidden = 128;

  bool operator==(const HeadConfig&) const = default;
};

struct ModelConfig {
  Variant variant = Variant::pctcn;
  std::size_t n_classes = kDefaultClasses;
  std::size_t n_stacks = 3;
  std::size_t blocks_per_stack = 6;
  std::size_t bottleneck = kEmbeddingDim;
  std::size_t hidden = 256;
  std::size_t kernel = 3;
  HeadConfig head;

  std::size_t conditioning_sites() const { return n_stacks * blocks_per_stack; }
  // Dilation of block `index` within its stack: 1, 2, 4, ...
  std::size_t dilation(std::size_t index) const { return std::size_t{1} << index; }
  // Frames of context seen by the TCN (1 + sum of (K-1)*dilation).
  std::size_t receptive_field() const;
  bool has_heads() const { return variant == Variant::icatse; }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view text);

// Name -> shape of every parameter the configuration owns, in canonical
// (lexicographic) order. Head parameters are included only for icatse and
// only when `include_heads` is set.
std::map<std::string, Shape> expected_parameter_shapes(const ModelConfig& config,
                                                       bool include_heads = true);
bool is_head_parameter(std::string_view name);

}  // namespace catse
