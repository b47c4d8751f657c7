#include "catse/model_config.hpp"

#include <json.hpp>

#include "catse/errors.hpp"
#include "catse/filterbank.hpp"

namespace catse {

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::pctcn: return "pctcn";
    case Variant::ecatse: return "ecatse";
    case Variant::icatse: return "icatse";
  }
  return "unknown";
}

Variant parse_variant(std::string_view text) {
  if (text == "pctcn") return Variant::pctcn;
  if (text == "ecatse") return Variant::ecatse;
  if (text == "icatse") return Variant::icatse;
  throw UsageError("unknown model variant '" + std::string(text) +
                   "' (expected pctcn, ecatse or icatse)");
}

std::size_t ModelConfig::receptive_field() const {
  std::size_t field = 1;
  for (std::size_t s = 0; s < n_stacks; ++s)
    for (std::size_t b = 0; b < blocks_per_stack; ++b) field += (kernel - 1) * dilation(b);
  return field;
}

void ModelConfig::validate() const {
  if (n_stacks * blocks_per_stack != 18) {
    throw UsageError("separator must have 18 conditioned blocks (stacks x blocks)");
  }
  if (bottleneck != kEmbeddingDim) {
    throw UsageError("bottleneck width must equal the 128-dim conditioning embedding");
  }
  if (n_classes == 0 || hidden == 0 || kernel == 0) {
    throw UsageError("n_classes, hidden and kernel must be positive");
  }
  if (blocks_per_stack >= 8 * sizeof(std::size_t)) throw UsageError("too many blocks per stack");
  if (has_heads() && (head.channels == 0 || head.kernel == 0 || head.blocks == 0 ||
                      head.pool == 0 || head.fc_hidden == 0)) {
    throw UsageError("head dimensions must be positive");
  }
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["variant"] = std::string(to_string(c.variant));
  j["n_classes"] = c.n_classes;
  j["n_stacks"] = c.n_stacks;
  j["blocks_per_stack"] = c.blocks_per_stack;
  j["bottleneck"] = c.bottleneck;
  j["hidden"] = c.hidden;
  j["kernel"] = c.kernel;
  j["head"] = {{"channels", c.head.channels}, {"kernel", c.head.kernel},
               {"blocks", c.head.blocks},     {"pool", c.head.pool},
               {"fc_hidden", c.head.fc_hidden}};
  return j.dump();
}

ModelConfig config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.n_stacks = j.at("n_stacks").get<std::size_t>();
    c.blocks_per_stack = j.at("blocks_per_stack").get<std::size_t>();
    c.bottleneck = j.at("bottleneck").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.kernel = j.at("kernel").get<std::size_t>();
    const auto& h = j.at("head");
    c.head.channels = h.at("channels").get<std::size_t>();
    c.head.kernel = h.at("kernel").get<std::size_t>();
    c.head.blocks = h.at("blocks").get<std::size_t>();
    c.head.pool = h.at("pool").get<std::size_t>();
    c.head.fc_hidden = h.at("fc_hidden").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
}

std::map<std::string, Shape> expected_parameter_shapes(const ModelConfig& c, bool include_heads) {
  std::map<std::string, Shape> shapes;
  const std::size_t e = kEmbeddingDim, b = c.bottleneck, h = c.hidden;
  auto encoder = [&](const std::string& prefix, std::size_t in) {
    shapes[prefix + ".weight"] = {e, in};
    shapes[prefix + ".bias"] = {e};
  };
  encoder("cond.hint", c.n_classes);
  if (c.variant == Variant::ecatse) {
    encoder("cond.oracle", c.n_classes);
    encoder("cond.compose", 2 * e);
  }
  shapes["sep.input.weight"] = {b, kSpectralChannels, 1};
  shapes["sep.input.bias"] = {b};
  for (std::size_t s = 0; s < c.n_stacks; ++s) {
    for (std::size_t k = 0; k < c.blocks_per_stack; ++k) {
      const std::string p = "sep.s" + std::to_string(s) + ".b" + std::to_string(k) + ".";
      shapes[p + "in.weight"] = {h, b, 1};
      shapes[p + "in.bias"] = {h};
      shapes[p + "prelu1"] = {1};
      shapes[p + "norm1.gain"] = {h};
      shapes[p + "norm1.bias"] = {h};
      shapes[p + "dconv.weight"] = {h, 1, c.kernel};
      shapes[p + "dconv.bias"] = {h};
      shapes[p + "prelu2"] = {1};
      shapes[p + "norm2.gain"] = {h};
      shapes[p + "norm2.bias"] = {h};
      shapes[p + "res.weight"] = {b, h, 1};
      shapes[p + "res.bias"] = {b};
      shapes[p + "skip.weight"] = {b, h, 1};
      shapes[p + "skip.bias"] = {b};
    }
  }
  shapes["sep.mask.prelu"] = {1};
  shapes["sep.mask.weight"] = {kSpectralChannels, b, 1};
  shapes["sep.mask.bias"] = {kSpectralChannels};
  if (c.has_heads() && include_heads) {
    const auto& hc = c.head;
    for (std::size_t s = 0; s < c.n_stacks; ++s) {
      for (std::size_t k = 0; k < hc.blocks; ++k) {
        const std::string p = "head" + std::to_string(s) + ".conv" + std::to_string(k) + ".";
        shapes[p + "weight"] = {hc.channels, k == 0 ? b : hc.channels, hc.kernel};
        shapes[p + "bias"] = {hc.channels};
      }
    }
    shapes["classifier.fc1.weight"] = {hc.fc_hidden, c.n_stacks * hc.channels};
    shapes["classifier.fc1.bias"] = {hc.fc_hidden};
    shapes["classifier.fc2.weight"] = {c.n_classes, hc.fc_hidden};
    shapes["classifier.fc2.bias"] = {c.n_classes};
  }
  return shapes;
}

bool is_head_parameter(std::string_view name) {
  return name.starts_with("head") || name.starts_with("classifier.");
}

}  // namespace catse
