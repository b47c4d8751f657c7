#include "catse/condition.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "catse/errors.hpp"
#include "catse/model_config.hpp"

namespace catse {

std::size_t popcount(const MultiHot& hot) {
  return static_cast<std::size_t>(std::count_if(hot.begin(), hot.end(), [](auto b) { return b != 0; }));
}

MultiHot multi_hot(std::size_t n_classes, const std::vector<std::size_t>& indices) {
  MultiHot hot(n_classes, 0);
  for (std::size_t i : indices) {
    if (i >= n_classes) {
      throw UsageError("class index " + std::to_string(i) + " out of range for " +
                       std::to_string(n_classes) + " classes");
    }
    hot[i] = 1;
  }
  return hot;
}

std::vector<std::size_t> active_indices(const MultiHot& hot) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hot.size(); ++i)
    if (hot[i]) out.push_back(i);
  return out;
}

bool is_subset(const MultiHot& subset, const MultiHot& superset) {
  if (subset.size() != superset.size()) return false;
  for (std::size_t i = 0; i < subset.size(); ++i)
    if (subset[i] && !superset[i]) return false;
  return true;
}

Tensor to_tensor(const MultiHot& hot) {
  std::vector<double> v(hot.size());
  for (std::size_t i = 0; i < hot.size(); ++i) v[i] = hot[i] ? 1.0 : 0.0;
  return Tensor::vector(std::move(v));
}

ClassVocabulary::ClassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw DataError("class vocabulary has duplicate labels");
  for (const auto& n : names_) {
    if (n.empty() || n.find(',') != std::string::npos) {
      throw DataError("class labels must be non-empty and contain no commas");
    }
  }
}

ClassVocabulary ClassVocabulary::numbered(std::size_t n_classes) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_classes; ++i) {
    names.push_back((i < 10 ? "class0" : "class") + std::to_string(i));
  }
  return ClassVocabulary(std::move(names));
}

const std::string& ClassVocabulary::name(std::size_t index) const {
  if (index >= names_.size()) throw UsageError("class index out of range");
  return names_[index];
}

std::size_t ClassVocabulary::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw UsageError("unknown class name '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

MultiHot ClassVocabulary::parse(std::string_view list) const {
  std::vector<std::size_t> indices;
  while (!list.empty()) {
    const auto comma = list.find(',');
    std::string_view item = list.substr(0, comma);
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) continue;
    std::size_t index = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), index);
    if (ec == std::errc() && end == item.data() + item.size()) {
      indices.push_back(index);
    } else {
      indices.push_back(index_of(item));
    }
  }
  MultiHot hot = multi_hot(size(), indices);
  if (popcount(hot) == 0) throw UsageError("class list is empty");
  return hot;
}

namespace {

Tensor encode(const MultiHot& hot, const EncoderParams& params, const char* what) {
  if (hot.size() != params.weight.dim(1)) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(params.weight.dim(1)) +
                         " classes, got " + std::to_string(hot.size()));
  }
  if (popcount(hot) == 0) throw UsageError(std::string(what) + ": at least one class must be set");
  return relu(fully_connected(to_tensor(hot), params.weight, params.bias));
}

}  // namespace

Tensor encode_hint(const MultiHot& hot, const EncoderParams& params) {
  return encode(hot, params, "encode_hint");
}

Tensor encode_oracle(const MultiHot& hot, const EncoderParams& params) {
  return encode(hot, params, "encode_oracle");
}

Tensor compose(const Tensor& hint_embedding, const Tensor& oracle_embedding,
               const EncoderParams& params) {
  if (hint_embedding.numel() != kEmbeddingDim || oracle_embedding.numel() != kEmbeddingDim) {
    throw DimensionError("compose: both embeddings must have 128 entries");
  }
  return relu(fully_connected(concat({hint_embedding, oracle_embedding}, 0), params.weight,
                              params.bias));
}

}  // namespace catse
