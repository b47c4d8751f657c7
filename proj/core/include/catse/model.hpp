#pragma once

#include <optional>
#include <span>
#include <vector>

#include "catse/condition.hpp"
#include "catse/filterbank.hpp"
#include "catse/separator.hpp"
#include "catse/weights.hpp"

namespace catse {

// Everything produced by one offline pass over a mixture.
struct Extraction {
  Tensor spectrum;                    // [258 x N] analysis of the mixture
  Tensor mask;                        // [258 x N]
  Tensor estimate;                    // waveform, (N - 1) * 64 + 128 samples
  std::vector<Tensor> stack_outputs;  // consumed by classification heads
};

// A separator variant bound to its weights. Parameter tensors are shared
// handles into the ModelWeights, so optimizer updates are visible here.
class Model {
 public:
  explicit Model(ModelWeights weights);

  static Model initialize(const ModelConfig& config, std::uint64_t seed) {
    return Model(initialize_weights(config, seed));
  }

  const ModelConfig& config() const { return weights_.config; }
  Variant variant() const { return weights_.config.variant; }
  const ModelWeights& weights() const { return weights_; }
  const Filterbank& filterbank() const { return filterbank_; }
  const SeparatorParams& separator_params() const { return separator_; }
  bool has_heads() const { return heads_.has_value(); }

  // Conditioning embedding (128) for the variant: hint encoder for pcTCN and
  // iCATSE, composite hint+oracle encoder for eCATSE. Supplying an oracle to
  // a non-eCATSE model, or omitting it for eCATSE, is a UsageError.
  Tensor condition(const MultiHot& hint, const std::optional<MultiHot>& oracle) const;

  SeparatorOutput separate(const Tensor& spectrum, const Tensor& cond) const;
  // Class probabilities from the auxiliary heads; iCATSE with heads loaded only.
  Tensor classify(const std::vector<Tensor>& stack_outputs) const;

  // analyze -> separate -> apply_mask -> synthesize.
  Extraction extract(std::span<const double> mixture, const MultiHot& hint,
                     const std::optional<MultiHot>& oracle) const;
  // Same pipeline with an externally supplied embedding.
  Extraction extract_with_embedding(std::span<const double> mixture, const Tensor& cond) const;

  // Inference convenience: estimate zero-padded to the mixture length.
  std::vector<double> extract_waveform(std::span<const double> mixture, const MultiHot& hint,
                                       const std::optional<MultiHot>& oracle) const;

 private:
  ModelWeights weights_;
  Filterbank filterbank_;
  EncoderParams hint_encoder_;
  std::optional<EncoderParams> oracle_encoder_;
  std::optional<EncoderParams> compose_encoder_;
  SeparatorParams separator_;
  std::optional<HeadParams> heads_;
};

}  // namespace catse
