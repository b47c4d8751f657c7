#include "catse/weights.hpp"

#include <bit>
#include <cmath>
#include <json.hpp>
#include <random>

#include "catse/errors.hpp"
#include "catse/wav.hpp"

namespace catse {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'T', 'S', 'E', 'W', '1', '\0'};

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw DataError("weights file is truncated or corrupt");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t ModelWeights::parameter_count(bool include_heads) const {
  std::size_t total = 0;
  for (const auto& [name, t] : params) {
    if (!include_heads && is_head_parameter(name)) continue;
    total += t.numel();
  }
  return total;
}

ModelWeights ModelWeights::clone() const {
  ModelWeights copy;
  copy.format_version = format_version;
  copy.config = config;
  for (const auto& [name, t] : params) copy.params.emplace(name, t.clone());
  return copy;
}

ModelWeights initialize_weights(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelWeights weights;
  weights.config = config;
  for (const auto& [name, shape] : expected_parameter_shapes(config)) {
    std::vector<double> values(shape_numel(shape), 0.0);
    if (ends_with(name, "prelu1") || ends_with(name, "prelu2") || ends_with(name, ".prelu")) {
      std::fill(values.begin(), values.end(), kPreluInit);
    } else if (ends_with(name, ".gain")) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (ends_with(name, ".weight")) {
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::mt19937_64 rng(seed ^ fnv1a(name));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : values) v = dist(rng);
    }
    weights.params.emplace(name, Tensor(shape, std::move(values), true));
  }
  return weights;
}

std::string serialize_weights(const ModelWeights& weights) {
  std::string out(kMagic, sizeof(kMagic));
  nlohmann::json meta;
  meta["version"] = weights.format_version;
  meta["variant"] = std::string(to_string(weights.config.variant));
  meta["config"] = nlohmann::json::parse(config_to_json(weights.config));
  const std::string meta_text = meta.dump();
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  put_u32(out, static_cast<std::uint32_t>(weights.params.size()));
  for (const auto& [name, t] : weights.params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

ModelWeights deserialize_weights(std::string_view bytes, LoadMode mode) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw DataError("not a weights file (bad magic bytes)");
  }
  ModelWeights weights;
  const std::string_view meta_text = in.take(in.u32());
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    weights.format_version = meta.at("version").get<std::uint32_t>();
    if (weights.format_version != kWeightsFormatVersion) {
      throw DataError("unsupported weights format version " + std::to_string(weights.format_version));
    }
    weights.config = config_from_json(meta.at("config").dump());
    if (parse_variant(meta.at("variant").get<std::string>()) != weights.config.variant) {
      throw DataError("weights metadata variant disagrees with its config");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt weights metadata: ") + e.what());
  }
  weights.config.validate();

  const auto expected = expected_parameter_shapes(weights.config, mode == LoadMode::training);
  const std::uint32_t count = in.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name(in.take(in.u32()));
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw DataError("weights file is corrupt (rank " + std::to_string(rank) + ")");
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    const std::size_t n = shape_numel(shape);
    if (n > bytes.size()) throw DataError("weights file is truncated or corrupt");
    const std::string_view raw = in.take(4 * n);
    const bool skip = mode == LoadMode::inference && is_head_parameter(name) &&
                      weights.config.has_heads();
    if (skip) continue;
    auto it = expected.find(name);
    if (it == expected.end()) throw DataError("unexpected parameter '" + name + "' in weights file");
    if (it->second != shape) {
      throw DataError("parameter '" + name + "' has shape " + shape_to_string(shape) +
                      ", expected " + shape_to_string(it->second));
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (!weights.params.emplace(name, Tensor(shape, std::move(values), true)).second) {
      throw DataError("duplicate parameter '" + name + "' in weights file");
    }
  }
  if (!in.done()) throw DataError("trailing bytes after weights records");
  for (const auto& [name, shape] : expected) {
    if (!weights.params.contains(name)) throw DataError("weights file is missing parameter '" + name + "'");
  }
  return weights;
}

void save_weights(const ModelWeights& weights, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_weights(weights));
}

ModelWeights load_weights(const std::filesystem::path& path, LoadMode mode) {
  return deserialize_weights(read_file(path), mode);
}

}  // namespace catse
