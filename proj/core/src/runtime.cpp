#include "catse/runtime.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "catse/errors.hpp"
#include "catse/wav.hpp"

namespace catse {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

// out = W * in + b for a [rows x cols (x 1)] weight.
void affine(const Tensor& weight, const Tensor& bias, std::span<const double> in, std::span<double> out) {
  const std::size_t rows = weight.dim(0), cols = weight.numel() / rows;
  Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(rows));
  y.noalias() = ConstMap(weight.values().data(), rows, cols) *
                Eigen::Map<const Eigen::VectorXd>(in.data(), static_cast<Eigen::Index>(cols));
  const auto b = bias.values();
  for (std::size_t r = 0; r < rows; ++r) out[r] += b[r];
}

void prelu_inplace(std::span<double> x, const Tensor& slope) {
  const double a = slope[0];
  for (auto& v : x) v = v >= 0.0 ? v : a * v;
}

}  // namespace

Stream::Stream(std::shared_ptr<const Model> model, const MultiHot& hint,
               const std::optional<MultiHot>& oracle)
    : model_(std::move(model)) {
  if (!model_) throw UsageError("open_stream: no model");
  const Tensor cond = model_->condition(hint, oracle);
  embedding_.assign(cond.values().begin(), cond.values().end());

  const ModelConfig& c = model_->config();
  for (const auto& block : model_->separator_params().blocks) {
    BlockState s;
    s.ring.assign((c.kernel - 1) * block.dilation * c.hidden, 0.0);
    blocks_.push_back(std::move(s));
  }
  input_.assign(kHop, 0.0);
  pending_.assign(kHop, 0.0);
  tail_.assign(kHop, 0.0);
  spectrum_.resize(kSpectralChannels);
  logits_.resize(kSpectralChannels);
  x_.resize(c.bottleneck);
  h_.resize(c.hidden);
  d_.resize(c.hidden);
  res_.resize(c.bottleneck);
  skip_.resize(c.bottleneck);
  skip_sum_.resize(c.bottleneck);
  frame_.resize(kWindow);
}

std::size_t Stream::state_size() const {
  std::size_t n = embedding_.size() + input_.size() + pending_.size() + tail_.size();
  for (const auto& b : blocks_) n += b.ring.size() + 2 * 3;
  return n;
}

void Stream::normalize(NormState& state, std::span<double> h, const Tensor& gain,
                       const Tensor& bias) const {
  double f1 = 0.0, f2 = 0.0;
  for (double v : h) {
    f1 += v;
    f2 += v * v;
  }
  state.sum += f1;
  state.sum_sq += f2;
  state.count += h.size();
  const double n = static_cast<double>(state.count);
  const double mu = state.sum / n;
  const double var = std::max(state.sum_sq / n - mu * mu, 0.0);
  const double inv_std = 1.0 / std::sqrt(var + kCglnEps);
  const auto g = gain.values();
  const auto b = bias.values();
  for (std::size_t c = 0; c < h.size(); ++c) h[c] = g[c] * (h[c] - mu) * inv_std + b[c];
}

void Stream::process_frame(std::span<const double> window, std::span<double> frame_out) {
  const ModelConfig& c = model_->config();
  const SeparatorParams& p = model_->separator_params();
  const std::size_t hidden = c.hidden, taps = c.kernel;

  model_->filterbank().analyze_frame(window, spectrum_);
  affine(p.input_weight, p.input_bias, spectrum_, x_);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const BlockParams& bp = p.blocks[i];
    BlockState& st = blocks_[i];
    affine(bp.in_weight, bp.in_bias, x_, h_);
    prelu_inplace(h_, bp.prelu1);
    normalize(st.norm1, h_, bp.norm1_gain, bp.norm1_bias);

    // Depthwise causal conv over the ring of past normalized frames.
    const std::size_t span = (taps - 1) * bp.dilation;
    const auto w = bp.dconv_weight.values();
    const auto bias = bp.dconv_bias.values();
    for (std::size_t ch = 0; ch < hidden; ++ch) {
      double acc = bias[ch];
      for (std::size_t k = 0; k < taps; ++k) {
        const std::size_t shift = (taps - 1 - k) * bp.dilation;
        if (frames_ < shift) continue;
        const double past = shift == 0
                                ? h_[ch]
                                : st.ring[((st.ring_pos + span - shift) % span) * hidden + ch];
        acc += w[ch * taps + k] * past;
      }
      d_[ch] = acc;
    }
    if (span > 0) {
      std::copy(h_.begin(), h_.end(), st.ring.begin() + static_cast<std::ptrdiff_t>(st.ring_pos * hidden));
      st.ring_pos = (st.ring_pos + 1) % span;
    }

    prelu_inplace(d_, bp.prelu2);
    normalize(st.norm2, d_, bp.norm2_gain, bp.norm2_bias);
    affine(bp.skip_weight, bp.skip_bias, d_, skip_);
    if (i == 0) {
      skip_sum_ = skip_;
    } else {
      for (std::size_t ch = 0; ch < skip_sum_.size(); ++ch) skip_sum_[ch] = skip_sum_[ch] + skip_[ch];
    }
    affine(bp.res_weight, bp.res_bias, d_, res_);
    for (std::size_t ch = 0; ch < x_.size(); ++ch) x_[ch] = (x_[ch] + res_[ch]) * embedding_[ch];
  }
  prelu_inplace(skip_sum_, p.mask_prelu);
  affine(p.mask_weight, p.mask_bias, skip_sum_, logits_);
  for (std::size_t ch = 0; ch < kSpectralChannels; ++ch) {
    const double m = std::clamp(1.0 / (1.0 + std::exp(-logits_[ch])), kSigmoidFloor, 1.0 - kSigmoidFloor);
    spectrum_[ch] = spectrum_[ch] * m;
  }
  model_->filterbank().synthesize_frame(spectrum_, frame_out);
  ++frames_;
}

void Stream::push(std::span<const double> samples, std::span<double> out) {
  if (closed_) throw UsageError("push on a flushed stream");
  if (samples.size() != kHop || out.size() != kHop) {
    throw UsageError("push expects exactly 64 samples per call, got " + std::to_string(samples.size()));
  }
  std::copy(pending_.begin(), pending_.end(), out.begin());
  if (hops_ == 0) {
    std::fill(pending_.begin(), pending_.end(), 0.0);
  } else {
    std::vector<double> window(kWindow);
    std::copy(input_.begin(), input_.end(), window.begin());
    std::copy(samples.begin(), samples.end(), window.begin() + kHop);
    process_frame(window, frame_);
    for (std::size_t i = 0; i < kHop; ++i) {
      pending_[i] = tail_[i] + frame_[i];
      tail_[i] = frame_[kHop + i];
    }
  }
  std::copy(samples.begin(), samples.end(), input_.begin());
  ++hops_;
}

std::vector<double> Stream::push(std::span<const double> samples) {
  std::vector<double> out(kHop);
  push(samples, out);
  return out;
}

std::vector<double> Stream::flush() {
  if (closed_) throw UsageError("stream already flushed");
  closed_ = true;
  std::vector<double> out(pending_);
  out.insert(out.end(), tail_.begin(), tail_.end());
  return out;
}

std::vector<double> offline_stream_reference(const Model& model, std::span<const double> input,
                                             const MultiHot& hint,
                                             const std::optional<MultiHot>& oracle) {
  std::vector<double> out(input.size() + Stream::kWindow, 0.0);
  if (input.size() < Stream::kWindow) return out;
  const Tensor result = model.extract(input, hint, oracle).estimate;
  const auto estimate = result.values();
  std::copy(estimate.begin(), estimate.end(), out.begin() + Stream::kWindow);
  return out;
}

BenchmarkReport benchmark(Stream& stream, double seconds, std::uint64_t seed) {
  if (!(seconds > 0.0)) throw UsageError("benchmark duration must be positive");
  const auto hops = static_cast<std::size_t>(std::ceil(seconds * kSampleRate / Stream::kHop));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> in(Stream::kHop), out(Stream::kHop);
  std::vector<double> hop_us;
  hop_us.reserve(hops);
  BenchmarkReport report;
  report.output.reserve(hops * Stream::kHop);
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  for (std::size_t h = 0; h < hops; ++h) {
    for (auto& v : in) v = noise(rng);
    const auto t0 = clock::now();
    stream.push(in, out);
    const auto t1 = clock::now();
    hop_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    report.output.insert(report.output.end(), out.begin(), out.end());
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  report.hops = hops;
  report.audio_seconds = static_cast<double>(hops * Stream::kHop) / kSampleRate;
  report.real_time_factor = report.audio_seconds / std::max(report.wall_seconds, 1e-12);
  std::sort(hop_us.begin(), hop_us.end());
  auto percentile = [&](double q) {
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(hop_us.size() - 1) + 0.5);
    return hop_us[std::min(idx, hop_us.size() - 1)];
  };
  report.hop_p50_us = percentile(0.50);
  report.hop_p99_us = percentile(0.99);
  return report;
}

}  // namespace catse
