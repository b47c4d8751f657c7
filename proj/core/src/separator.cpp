#include "catse/separator.hpp"

#include <algorithm>

#include "catse/errors.hpp"
#include "catse/filterbank.hpp"

namespace catse {

namespace {

Tensor conv1x1(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return conv1d_causal(x, weight, bias, 1, 1);
}

}  // namespace

SeparatorOutput separator_forward(const Tensor& spectrum, const Tensor& cond,
                                  const ModelConfig& config, const SeparatorParams& params) {
  if (spectrum.rank() != 2 || spectrum.dim(0) != kSpectralChannels) {
    throw DimensionError("separator: expected [258 x N] spectrum, got " +
                         shape_to_string(spectrum.shape()));
  }
  if (cond.defined() && cond.numel() != config.bottleneck) {
    throw DimensionError("separator: conditioning embedding must have " +
                         std::to_string(config.bottleneck) + " entries");
  }
  if (params.blocks.size() != config.conditioning_sites()) {
    throw UsageError("separator: parameter set does not match configuration");
  }

  SeparatorOutput out;
  Tensor x = conv1x1(spectrum, params.input_weight, params.input_bias);
  Tensor skip_sum;
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const BlockParams& p = params.blocks[i];
    Tensor h = conv1x1(x, p.in_weight, p.in_bias);
    h = cgln(prelu(h, p.prelu1), p.norm1_gain, p.norm1_bias);
    h = conv1d_causal(h, p.dconv_weight, p.dconv_bias, p.dilation, config.hidden);
    h = cgln(prelu(h, p.prelu2), p.norm2_gain, p.norm2_bias);
    Tensor skip = conv1x1(h, p.skip_weight, p.skip_bias);
    skip_sum = skip_sum.defined() ? add(skip_sum, skip) : skip;
    x = add(x, conv1x1(h, p.res_weight, p.res_bias));
    if (cond.defined()) {
      x = mul(x, cond);
      ++out.conditioning_sites;
    }
    if ((i + 1) % config.blocks_per_stack == 0) out.stack_outputs.push_back(x);
  }
  Tensor logits = conv1x1(prelu(skip_sum, params.mask_prelu), params.mask_weight, params.mask_bias);
  out.mask = sigmoid(logits);
  return out;
}

Tensor classify(const std::vector<Tensor>& stack_outputs, const HeadConfig& config,
                const HeadParams& params) {
  if (stack_outputs.size() != params.convs.size()) {
    throw DimensionError("classify: one stack output per head required");
  }
  std::vector<Tensor> embeddings;
  for (std::size_t s = 0; s < stack_outputs.size(); ++s) {
    Tensor h = stack_outputs[s];
    for (const auto& [weight, bias] : params.convs[s]) {
      h = leaky_relu(conv1d_causal(h, weight, bias, 1, 1));
      h = maxpool1d(h, std::min(config.pool, h.dim(1)));
    }
    embeddings.push_back(mean_last_axis(h));
  }
  Tensor z = relu(fully_connected(concat(embeddings, 0), params.fc1_weight, params.fc1_bias));
  return sigmoid(fully_connected(z, params.fc2_weight, params.fc2_bias));
}

}  // namespace catse
