#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "catse/tensor.hpp"

namespace catse {

struct FilterbankConfig {
  std::size_t n_filters = 256;  // DFT size; frames are zero-padded up to it
  std::size_t kernel = 128;     // window length in samples
  std::size_t stride = 64;      // hop in samples
  double sample_rate = 16000.0;

  std::size_t bins() const { return n_filters / 2 + 1; }
  std::size_t channels() const { return 2 * bins(); }
  void validate() const;
};

// Stacked real/imag channel count of the default geometry.
inline constexpr std::size_t kSpectralChannels = 258;

// Delay inherent to the synthesis window, in milliseconds.
double algorithmic_latency_ms(const FilterbankConfig& config);

// 1 + floor((samples - kernel) / stride); throws if samples < kernel.
std::size_t frame_count(std::size_t samples, const FilterbankConfig& config);

// STFT analysis/synthesis with square-root Hann windows on both sides. Frame t
// covers samples [t*stride, t*stride + kernel). Spectral blocks are
// [2B x N] tensors: channels 0..B-1 hold real parts, B..2B-1 imaginary parts.
class Filterbank {
 public:
  explicit Filterbank(FilterbankConfig config = {});

  const FilterbankConfig& config() const { return config_; }
  std::span<const double> window() const { return window_; }

  Tensor analyze(std::span<const double> samples) const;
  // Overlap-add inverse; output length (N - 1) * stride + kernel.
  // Differentiable with respect to `block`.
  Tensor synthesize(const Tensor& block) const;

  // Single-frame kernels used by the streaming runtime.
  void analyze_frame(std::span<const double> frame, std::span<double> spectrum) const;
  void synthesize_frame(std::span<const double> spectrum, std::span<double> frame) const;

 private:
  FilterbankConfig config_;
  std::vector<double> window_;
  std::vector<double> analysis_;   // [channels x kernel], window folded in
  // [kernel x channels], window and 1/N folded in; shared with graph closures
  std::shared_ptr<std::vector<double>> synthesis_;
};

// Elementwise mask application on matching spectral blocks.
Tensor apply_mask(const Tensor& spectrum, const Tensor& mask);

}  // namespace catse
