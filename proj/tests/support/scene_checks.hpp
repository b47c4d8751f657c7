#pragma once

// Independent re-measurement of scene construction contracts.

#include <cmath>
#include <span>
#include <vector>

#include "catse/scenegen.hpp"

namespace scene_checks {

struct SceneCheck {
  bool sum_exact = true;        // mixture == background + stems, summed in class order
  double max_residual = 0.0;    // |mixture - background - sum(stems)|
  double max_snr_error_db = 0.0;
};

inline double energy(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline SceneCheck check_scene(const catse::MixtureExample& ex, const catse::SceneSpec& spec) {
  SceneCheck out;
  for (std::size_t i = 0; i < ex.mixture.size(); ++i) {
    double acc = ex.background[i];
    for (const auto& [cls, stem] : ex.stems) acc += stem[i];
    if (acc != ex.mixture[i]) out.sum_exact = false;
    double r = ex.mixture[i] - ex.background[i];
    for (const auto& [cls, stem] : ex.stems) r -= stem[i];
    out.max_residual = std::max(out.max_residual, std::abs(r));
  }
  const auto& rec = ex.record;
  for (std::size_t e = 0; e < rec.classes.size(); ++e) {
    const auto offset = static_cast<std::size_t>(std::llround(rec.offsets_s[e] * spec.sample_rate));
    const auto len = static_cast<std::size_t>(std::llround(rec.durations_s[e] * spec.sample_rate));
    const auto& stem = ex.stems.at(rec.classes[e]);
    const double es = energy(std::span<const double>(stem).subspan(offset, len));
    const double eb = energy(std::span<const double>(ex.background).subspan(offset, len));
    const double measured = 10.0 * std::log10(es / eb);
    out.max_snr_error_db = std::max(out.max_snr_error_db, std::abs(measured - rec.snrs_db[e]));
  }
  return out;
}

// Peak |normalized cross-correlation| over lags in [-max_lag, max_lag].
inline double xcorr_peak(const std::vector<double>& a, const std::vector<double>& b, std::size_t max_lag) {
  const double norm = std::sqrt(energy(a) * energy(b));
  double peak = 0.0;
  const long n = static_cast<long>(std::min(a.size(), b.size()));
  for (long lag = -static_cast<long>(max_lag); lag <= static_cast<long>(max_lag); ++lag) {
    double acc = 0.0;
    for (long i = std::max(0L, -lag); i < n && i + lag < n; ++i) acc += a[i] * b[i + lag];
    peak = std::max(peak, std::abs(acc) / norm);
  }
  return peak;
}

}  // namespace scene_checks
