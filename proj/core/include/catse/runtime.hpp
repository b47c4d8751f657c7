#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "catse/model.hpp"

namespace catse {

// Frame-synchronous streaming extraction.
//
// Each push() takes one 64-sample hop and returns 64 samples. Output is the
// offline pipeline result delayed by exactly one window (128 samples = 8 ms):
// the first 128 output samples are zero warm-up, and output sample m equals
// offline sample m - 128. flush() drains the final 128 samples, so a stream
// of L input samples yields L + 128 output samples in total.
class Stream {
 public:
  static constexpr std::size_t kHop = 64;
  static constexpr std::size_t kWindow = 128;

  // open_stream: the oracle is required for eCATSE and rejected otherwise.
  // Head parameters of iCATSE weights are never read.
  Stream(std::shared_ptr<const Model> model, const MultiHot& hint,
         const std::optional<MultiHot>& oracle = std::nullopt);

  std::vector<double> push(std::span<const double> samples);
  void push(std::span<const double> samples, std::span<double> out);
  std::vector<double> flush();

  bool closed() const { return closed_; }
  std::size_t frames_processed() const { return frames_; }
  std::size_t hops_pushed() const { return hops_; }
  // Number of doubles of carried state; independent of stream length.
  std::size_t state_size() const;
  const Model& model() const { return *model_; }

 private:
  struct NormState {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
  };
  struct BlockState {
    NormState norm1, norm2;
    std::vector<double> ring;  // [(K-1)*dilation x hidden], oldest overwritten first
    std::size_t ring_pos = 0;
  };

  void process_frame(std::span<const double> window, std::span<double> frame_out);
  void normalize(NormState& state, std::span<double> h, const Tensor& gain, const Tensor& bias) const;

  std::shared_ptr<const Model> model_;
  std::vector<double> embedding_;
  std::vector<BlockState> blocks_;
  std::vector<double> input_;    // previous hop, completes the next window
  std::vector<double> pending_;  // finalized samples awaiting emission
  std::vector<double> tail_;     // second half of the last synthesized frame
  std::size_t frames_ = 0;
  std::size_t hops_ = 0;
  bool closed_ = false;

  // Scratch buffers (not state).
  std::vector<double> spectrum_, logits_, x_, h_, d_, res_, skip_, skip_sum_, frame_;
};

// Offline pipeline arranged on the stream's timeline: 128 zeros followed by
// the offline estimate, zero-padded to length(input) + 128.
std::vector<double> offline_stream_reference(const Model& model, std::span<const double> input,
                                             const MultiHot& hint,
                                             const std::optional<MultiHot>& oracle = std::nullopt);

struct BenchmarkReport {
  double audio_seconds = 0.0;
  double wall_seconds = 0.0;
  double real_time_factor = 0.0;  // audio seconds per wall second
  double hop_p50_us = 0.0;
  double hop_p99_us = 0.0;
  std::size_t hops = 0;
  std::vector<double> output;
};

// Streams `seconds` of seeded synthetic audio through `stream` and times every
// hop. Reports only; there is no pass/fail threshold.
BenchmarkReport benchmark(Stream& stream, double seconds, std::uint64_t seed = 1);

}  // namespace catse
