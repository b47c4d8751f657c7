#pragma once

#include <cstddef>
#include <vector>

#include "catse/model_config.hpp"
#include "catse/tensor.hpp"

namespace catse {

// Parameters of one conditioned TCN block.
struct BlockParams {
  Tensor in_weight, in_bias;  // 1x1, bottleneck -> hidden
  Tensor prelu1;
  Tensor norm1_gain, norm1_bias;
  Tensor dconv_weight, dconv_bias;  // depthwise, groups == hidden
  Tensor prelu2;
  Tensor norm2_gain, norm2_bias;
  Tensor res_weight, res_bias;    // 1x1, hidden -> bottleneck
  Tensor skip_weight, skip_bias;  // 1x1, hidden -> bottleneck
  std::size_t dilation = 1;
};

struct SeparatorParams {
  Tensor input_weight, input_bias;  // 1x1, 258 -> bottleneck
  std::vector<BlockParams> blocks;  // stack-major
  Tensor mask_prelu;
  Tensor mask_weight, mask_bias;  // 1x1, bottleneck -> 258
};

struct SeparatorOutput {
  Tensor mask;                        // [258 x N], entries in (0, 1)
  std::vector<Tensor> stack_outputs;  // one [bottleneck x N] map per stack
  std::size_t conditioning_sites = 0;
};

// Mask estimation over a stacked real/imag spectrum [258 x N]. When `cond` is
// defined it multiplies the output of every block (after the residual sum)
// channelwise; an undefined `cond` runs the unconditioned network.
SeparatorOutput separator_forward(const Tensor& spectrum, const Tensor& cond,
                                  const ModelConfig& config, const SeparatorParams& params);

struct HeadParams {
  // heads[s][k] = {weight, bias} of conv block k on stack s.
  std::vector<std::vector<std::pair<Tensor, Tensor>>> convs;
  Tensor fc1_weight, fc1_bias;
  Tensor fc2_weight, fc2_bias;
};

// Multi-label class probabilities [n_classes] from the stack outputs. Each
// head runs `blocks` x (conv, LeakyReLU, max-pool) and averages over time;
// the three head embeddings are concatenated and fed through two FC layers
// (ReLU between) and a sigmoid. Pool windows shrink to the remaining frame
// count on short inputs.
Tensor classify(const std::vector<Tensor>& stack_outputs, const HeadConfig& config,
                const HeadParams& params);

}  // namespace catse
