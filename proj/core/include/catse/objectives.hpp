#pragma once

#include <span>

#include "catse/condition.hpp"
#include "catse/tensor.hpp"

namespace catse {

struct LossWeights {
  double lambda_cls = 0.5;  // weight of the classification term
  void validate() const;
};

// SI-SDR and SNR report in [-80, 80] dB. The denominator guard is relative
// (1e-8 of the estimate energy), so a perfect estimate lands exactly on the
// +80 dB ceiling and scaling the estimate never changes the value.
inline constexpr double kSdrGuard = 1e-8;
inline constexpr double kSdrFloorDb = -80.0;
inline constexpr double kSdrCeilingDb = 80.0;

// Scale-invariant SDR in dB. Both signals are made zero-mean first.
// A reference that is zero after mean removal is a UsageError.
double si_sdr(std::span<const double> estimate, std::span<const double> reference);
double snr(std::span<const double> estimate, std::span<const double> reference);
// si_sdr(estimate, reference) - si_sdr(mixture, reference)
double si_snri(std::span<const double> estimate, std::span<const double> reference,
               std::span<const double> mixture);

// -si_sdr as a differentiable scalar of `estimate`. Zero gradient on the floor.
Tensor loss_separation(const Tensor& estimate, std::span<const double> reference);

// Mean binary cross-entropy of probabilities against a binary target. Entries
// of `probabilities` outside (0, 1) are a UsageError.
Tensor loss_classification(const Tensor& probabilities, const MultiHot& target);

// L_s + lambda_cls * L_c
Tensor loss_combined(const Tensor& separation, const Tensor& classification, const LossWeights& w);
double loss_combined(double separation, double classification, const LossWeights& w);

}  // namespace catse
