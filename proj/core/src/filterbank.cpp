#include "catse/filterbank.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <string>

#include "catse/errors.hpp"

namespace catse {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

}  // namespace

void FilterbankConfig::validate() const {
  if (stride == 0 || kernel == 0 || n_filters == 0 || n_filters % 2 != 0) {
    throw UsageError("filterbank: sizes must be positive and the DFT size even");
  }
  if (!(stride <= kernel && kernel <= n_filters)) {
    throw UsageError("filterbank: require stride <= kernel <= n_filters");
  }
  if (kernel % stride != 0 || kernel / stride != 2) {
    // Square-root Hann windows only sum to a constant at 50% overlap.
    throw UsageError("filterbank: kernel must be exactly twice the stride");
  }
  if (!(sample_rate > 0.0)) throw UsageError("filterbank: sample rate must be positive");
}

double algorithmic_latency_ms(const FilterbankConfig& config) {
  return static_cast<double>(config.kernel) / config.sample_rate * 1000.0;
}

std::size_t frame_count(std::size_t samples, const FilterbankConfig& config) {
  if (samples < config.kernel) {
    throw DimensionError("filterbank: " + std::to_string(samples) +
                         " samples is shorter than one window of " +
                         std::to_string(config.kernel));
  }
  return 1 + (samples - config.kernel) / config.stride;
}

Filterbank::Filterbank(FilterbankConfig config) : config_(config) {
  config_.validate();
  const std::size_t n = config_.n_filters, len = config_.kernel, bins = config_.bins();
  const std::size_t ch = config_.channels();
  window_.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    // Periodic Hann; its square root applied twice sums to one at hop len/2.
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                             static_cast<double>(len));
    window_[i] = std::sqrt(hann);
  }
  analysis_.assign(ch * len, 0.0);
  synthesis_ = std::make_shared<std::vector<double>>(len * ch, 0.0);
  auto& synthesis = *synthesis_;
  for (std::size_t k = 0; k < bins; ++k) {
    const double weight = (k == 0 || k == bins - 1) ? 1.0 : 2.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) /
                           static_cast<double>(n);
      const double c = std::cos(phase), s = std::sin(phase);
      analysis_[k * len + i] = window_[i] * c;
      analysis_[(bins + k) * len + i] = -window_[i] * s;
      synthesis[i * ch + k] = window_[i] * weight * c / static_cast<double>(n);
      synthesis[i * ch + bins + k] = -window_[i] * weight * s / static_cast<double>(n);
    }
  }
}

Tensor Filterbank::analyze(std::span<const double> samples) const {
  const std::size_t frames = frame_count(samples.size(), config_);
  const std::size_t len = config_.kernel, ch = config_.channels();
  RowMat framed(len, frames);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t i = 0; i < len; ++i) framed(i, t) = samples[t * config_.stride + i];
  std::vector<double> out(ch * frames);
  MutMap(out.data(), ch, frames).noalias() = ConstMap(analysis_.data(), ch, len) * framed;
  return Tensor({ch, frames}, std::move(out));
}

Tensor Filterbank::synthesize(const Tensor& block) const {
  const std::size_t ch = config_.channels(), len = config_.kernel, hop = config_.stride;
  if (block.rank() != 2 || block.dim(0) != ch) {
    throw DimensionError("synthesize: expected [" + std::to_string(ch) + " x N] block, got " +
                         shape_to_string(block.shape()));
  }
  const std::size_t frames = block.dim(1);
  if (frames == 0) throw DimensionError("synthesize: empty block");
  const std::size_t out_len = (frames - 1) * hop + len;

  RowMat framed = ConstMap(synthesis_->data(), len, ch) * ConstMap(block.values().data(), ch, frames);
  std::vector<double> out(out_len, 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t i = 0; i < len; ++i) out[t * hop + i] += framed(i, t);

  std::shared_ptr<const std::vector<double>> basis = synthesis_;
  return make_op_result({out_len}, std::move(out), {block},
                        [block, basis, ch, len, hop, frames](std::span<const double> g) {
                          auto gb = grad_sink(block);
                          RowMat g_frames(len, frames);
                          for (std::size_t t = 0; t < frames; ++t)
                            for (std::size_t i = 0; i < len; ++i) g_frames(i, t) = g[t * hop + i];
                          MutMap(gb.data(), ch, frames).noalias() +=
                              ConstMap(basis->data(), len, ch).transpose() * g_frames;
                        });
}

void Filterbank::analyze_frame(std::span<const double> frame, std::span<double> spectrum) const {
  const std::size_t len = config_.kernel, ch = config_.channels();
  if (frame.size() != len || spectrum.size() != ch) {
    throw DimensionError("analyze_frame: wrong buffer sizes");
  }
  Eigen::Map<Eigen::VectorXd>(spectrum.data(), ch).noalias() =
      ConstMap(analysis_.data(), ch, len) * Eigen::Map<const Eigen::VectorXd>(frame.data(), len);
}

void Filterbank::synthesize_frame(std::span<const double> spectrum, std::span<double> frame) const {
  const std::size_t len = config_.kernel, ch = config_.channels();
  if (frame.size() != len || spectrum.size() != ch) {
    throw DimensionError("synthesize_frame: wrong buffer sizes");
  }
  Eigen::Map<Eigen::VectorXd>(frame.data(), len).noalias() =
      ConstMap(synthesis_->data(), len, ch) *
      Eigen::Map<const Eigen::VectorXd>(spectrum.data(), ch);
}

Tensor apply_mask(const Tensor& spectrum, const Tensor& mask) {
  if (spectrum.shape() != mask.shape()) {
    throw DimensionError("apply_mask: spectrum " + shape_to_string(spectrum.shape()) +
                         " and mask " + shape_to_string(mask.shape()) + " differ");
  }
  return mul(spectrum, mask);
}

}  // namespace catse
