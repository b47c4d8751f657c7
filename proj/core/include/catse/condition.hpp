#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "catse/tensor.hpp"

namespace catse {

// Binary class indicator (one- or multi-hot).
using MultiHot = std::vector<std::uint8_t>;

std::size_t popcount(const MultiHot& hot);
MultiHot multi_hot(std::size_t n_classes, const std::vector<std::size_t>& indices);
std::vector<std::size_t> active_indices(const MultiHot& hot);
// True when every bit set in `subset` is also set in `superset`.
bool is_subset(const MultiHot& subset, const MultiHot& superset);
Tensor to_tensor(const MultiHot& hot);

class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  explicit ClassVocabulary(std::vector<std::string> names);
  // "class00", "class01", ...
  static ClassVocabulary numbered(std::size_t n_classes);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const;
  std::size_t index_of(std::string_view name) const;

  // Parses "3,7" or "dog,siren" (mixed allowed) into a multi-hot vector.
  MultiHot parse(std::string_view list) const;

 private:
  std::vector<std::string> names_;
};

struct EncoderParams {
  Tensor weight;  // [128 x in]
  Tensor bias;    // [128]
};

// FC(n_classes -> 128) + ReLU over a one-/multi-hot hint. Multi-hot input is
// used as-is, without normalizing by the number of set bits.
Tensor encode_hint(const MultiHot& hot, const EncoderParams& params);

// Oracle encoder: same architecture and contract as encode_hint, separate weights.
Tensor encode_oracle(const MultiHot& hot, const EncoderParams& params);

// FC(256 -> 128) + ReLU over concat(hint embedding, oracle embedding).
Tensor compose(const Tensor& hint_embedding, const Tensor& oracle_embedding,
               const EncoderParams& params);

}  // namespace catse
