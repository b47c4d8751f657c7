#include "catse/objectives.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "catse/errors.hpp"

namespace catse {

namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

struct SdrTerms {
  std::vector<double> est;  // zero-mean estimate
  std::vector<double> ref;  // zero-mean reference
  double dot = 0.0;         // <est, ref>
  double ref_energy = 0.0;
  double est_energy = 0.0;
  double target_energy = 0.0;
  double denominator = 0.0;
  double value = kSdrFloorDb;
  bool floored = true;
};

std::vector<double> centered(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
  return out;
}

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DimensionError(std::string(what) + ": empty signals");
}

SdrTerms sdr_terms(std::span<const double> estimate, std::span<const double> reference) {
  check_pair(estimate, reference, "si_sdr");
  SdrTerms t;
  t.est = centered(estimate);
  t.ref = centered(reference);
  for (std::size_t i = 0; i < t.est.size(); ++i) {
    t.dot += t.est[i] * t.ref[i];
    t.ref_energy += t.ref[i] * t.ref[i];
    t.est_energy += t.est[i] * t.est[i];
  }
  if (!(t.ref_energy > 0.0)) throw UsageError("si_sdr: reference is zero after mean removal");
  const double alpha = t.dot / t.ref_energy;
  double error_energy = 0.0;
  for (std::size_t i = 0; i < t.est.size(); ++i) {
    const double e = alpha * t.ref[i] - t.est[i];
    error_energy += e * e;
  }
  t.target_energy = alpha * alpha * t.ref_energy;
  t.denominator = error_energy + kSdrGuard * t.est_energy;
  if (t.target_energy > 0.0 && t.denominator > 0.0) {
    const double v = kDbPerNeper * std::log(t.target_energy / t.denominator);
    if (v > kSdrFloorDb) {
      t.value = std::min(v, kSdrCeilingDb);
      t.floored = false;
    }
  }
  return t;
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_cls >= 0.0) || !std::isfinite(lambda_cls)) {
    throw UsageError("lambda_cls must be a finite non-negative number");
  }
}

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  return sdr_terms(estimate, reference).value;
}

double snr(std::span<const double> estimate, std::span<const double> reference) {
  check_pair(estimate, reference, "snr");
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    signal += reference[i] * reference[i];
    const double e = reference[i] - estimate[i];
    noise += e * e;
  }
  if (!(signal > 0.0)) throw UsageError("snr: reference is identically zero");
  const double v = kDbPerNeper * std::log(signal / (noise + kSdrGuard * signal));
  return std::clamp(v, kSdrFloorDb, kSdrCeilingDb);
}

double si_snri(std::span<const double> estimate, std::span<const double> reference,
               std::span<const double> mixture) {
  return si_sdr(estimate, reference) - si_sdr(mixture, reference);
}

Tensor loss_separation(const Tensor& estimate, std::span<const double> reference) {
  SdrTerms t = sdr_terms(estimate.values(), reference);
  const double loss = -t.value;
  if (t.floored || t.value >= kSdrCeilingDb) {
    return make_op_result({1}, {loss}, {estimate}, [](std::span<const double>) {});
  }
  // d(si_sdr)/d(est_c) = k * (2 ref / dot - (2 (1 + guard) est_c - 2 dot ref / R) / D),
  // then projected through the mean removal.
  const std::size_t n = t.est.size();
  std::vector<double> dvalue(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d_target = 2.0 * t.ref[i] / t.dot;
    const double d_denom =
        (2.0 * (1.0 + kSdrGuard) * t.est[i] - 2.0 * t.dot * t.ref[i] / t.ref_energy) / t.denominator;
    dvalue[i] = kDbPerNeper * (d_target - d_denom);
    mean += dvalue[i];
  }
  mean /= static_cast<double>(n);
  for (auto& v : dvalue) v -= mean;
  return make_op_result({1}, {loss}, {estimate},
                        [estimate, dvalue = std::move(dvalue)](std::span<const double> g) {
                          auto ge = grad_sink(estimate);
                          for (std::size_t i = 0; i < ge.size(); ++i) ge[i] -= g[0] * dvalue[i];
                        });
}

Tensor loss_classification(const Tensor& probabilities, const MultiHot& target) {
  const auto p = probabilities.values();
  if (p.size() != target.size()) {
    throw DimensionError("loss_classification: " + std::to_string(p.size()) +
                         " probabilities for " + std::to_string(target.size()) + " classes");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0 && p[i] < 1.0)) {
      throw UsageError("loss_classification: probabilities must lie strictly inside (0, 1)");
    }
    total -= target[i] ? std::log(p[i]) : std::log1p(-p[i]);
  }
  const double n = static_cast<double>(p.size());
  return make_op_result({1}, {total / n}, {probabilities},
                        [probabilities, target, n](std::span<const double> g) {
                          auto gp = grad_sink(probabilities);
                          const auto p = probabilities.values();
                          for (std::size_t i = 0; i < gp.size(); ++i) {
                            const double d = target[i] ? -1.0 / p[i] : 1.0 / (1.0 - p[i]);
                            gp[i] += g[0] * d / n;
                          }
                        });
}

Tensor loss_combined(const Tensor& separation, const Tensor& classification, const LossWeights& w) {
  w.validate();
  return add(separation, scale(classification, w.lambda_cls));
}

double loss_combined(double separation, double classification, const LossWeights& w) {
  w.validate();
  return separation + w.lambda_cls * classification;
}

}  // namespace catse
