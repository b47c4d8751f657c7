#include "catse/model.hpp"

#include "catse/errors.hpp"

namespace catse {

namespace {

class ParamLookup {
 public:
  explicit ParamLookup(const ModelWeights& w) : weights_(w) {}

  Tensor operator()(const std::string& name) const {
    auto it = weights_.params.find(name);
    if (it == weights_.params.end()) throw DataError("model is missing parameter '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return weights_.params.contains(name); }

 private:
  const ModelWeights& weights_;
};

}  // namespace

Model::Model(ModelWeights weights) : weights_(std::move(weights)) {
  const ModelConfig& c = weights_.config;
  c.validate();
  const auto required = expected_parameter_shapes(c, false);
  for (const auto& [name, shape] : required) {
    auto it = weights_.params.find(name);
    if (it == weights_.params.end()) throw DataError("model is missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw DataError("parameter '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                      ", expected " + shape_to_string(shape));
    }
  }
  const auto all = expected_parameter_shapes(c, true);
  for (const auto& [name, t] : weights_.params) {
    if (!all.contains(name)) throw DataError("unexpected parameter '" + name + "'");
  }

  ParamLookup p(weights_);
  hint_encoder_ = {p("cond.hint.weight"), p("cond.hint.bias")};
  if (c.variant == Variant::ecatse) {
    oracle_encoder_ = EncoderParams{p("cond.oracle.weight"), p("cond.oracle.bias")};
    compose_encoder_ = EncoderParams{p("cond.compose.weight"), p("cond.compose.bias")};
  }
  separator_.input_weight = p("sep.input.weight");
  separator_.input_bias = p("sep.input.bias");
  for (std::size_t s = 0; s < c.n_stacks; ++s) {
    for (std::size_t k = 0; k < c.blocks_per_stack; ++k) {
      const std::string pre = "sep.s" + std::to_string(s) + ".b" + std::to_string(k) + ".";
      BlockParams b;
      b.in_weight = p(pre + "in.weight");
      b.in_bias = p(pre + "in.bias");
      b.prelu1 = p(pre + "prelu1");
      b.norm1_gain = p(pre + "norm1.gain");
      b.norm1_bias = p(pre + "norm1.bias");
      b.dconv_weight = p(pre + "dconv.weight");
      b.dconv_bias = p(pre + "dconv.bias");
      b.prelu2 = p(pre + "prelu2");
      b.norm2_gain = p(pre + "norm2.gain");
      b.norm2_bias = p(pre + "norm2.bias");
      b.res_weight = p(pre + "res.weight");
      b.res_bias = p(pre + "res.bias");
      b.skip_weight = p(pre + "skip.weight");
      b.skip_bias = p(pre + "skip.bias");
      b.dilation = c.dilation(k);
      separator_.blocks.push_back(std::move(b));
    }
  }
  separator_.mask_prelu = p("sep.mask.prelu");
  separator_.mask_weight = p("sep.mask.weight");
  separator_.mask_bias = p("sep.mask.bias");

  if (c.has_heads() && p.has("classifier.fc1.weight")) {
    HeadParams h;
    for (std::size_t s = 0; s < c.n_stacks; ++s) {
      std::vector<std::pair<Tensor, Tensor>> convs;
      for (std::size_t k = 0; k < c.head.blocks; ++k) {
        const std::string pre = "head" + std::to_string(s) + ".conv" + std::to_string(k) + ".";
        convs.emplace_back(p(pre + "weight"), p(pre + "bias"));
      }
      h.convs.push_back(std::move(convs));
    }
    h.fc1_weight = p("classifier.fc1.weight");
    h.fc1_bias = p("classifier.fc1.bias");
    h.fc2_weight = p("classifier.fc2.weight");
    h.fc2_bias = p("classifier.fc2.bias");
    heads_ = std::move(h);
  }
}

Tensor Model::condition(const MultiHot& hint, const std::optional<MultiHot>& oracle) const {
  if (variant() == Variant::ecatse) {
    if (!oracle) throw UsageError("ecatse requires an oracle context vector");
    return compose(encode_hint(hint, hint_encoder_), encode_oracle(*oracle, *oracle_encoder_),
                   *compose_encoder_);
  }
  if (oracle) {
    throw UsageError(std::string(to_string(variant())) + " does not accept an oracle context");
  }
  return encode_hint(hint, hint_encoder_);
}

SeparatorOutput Model::separate(const Tensor& spectrum, const Tensor& cond) const {
  return separator_forward(spectrum, cond, weights_.config, separator_);
}

Tensor Model::classify(const std::vector<Tensor>& stack_outputs) const {
  if (!heads_) throw UsageError("classification heads are not available for this model");
  return catse::classify(stack_outputs, weights_.config.head, *heads_);
}

Extraction Model::extract_with_embedding(std::span<const double> mixture, const Tensor& cond) const {
  Extraction out;
  out.spectrum = filterbank_.analyze(mixture);
  SeparatorOutput sep = separate(out.spectrum, cond);
  out.mask = sep.mask;
  out.stack_outputs = std::move(sep.stack_outputs);
  out.estimate = filterbank_.synthesize(apply_mask(out.spectrum, out.mask));
  return out;
}

Extraction Model::extract(std::span<const double> mixture, const MultiHot& hint,
                          const std::optional<MultiHot>& oracle) const {
  return extract_with_embedding(mixture, condition(hint, oracle));
}

std::vector<double> Model::extract_waveform(std::span<const double> mixture, const MultiHot& hint,
                                            const std::optional<MultiHot>& oracle) const {
  const Tensor result = extract(mixture, hint, oracle).estimate;
  const auto estimate = result.values();
  std::vector<double> out(mixture.size(), 0.0);
  std::copy_n(estimate.begin(), std::min(estimate.size(), out.size()), out.begin());
  return out;
}

}  // namespace catse
