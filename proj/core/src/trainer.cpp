#include "catse/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "catse/errors.hpp"

namespace catse {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::optional<MultiHot> oracle_for(const Model& model, const MixtureExample& scene) {
  if (model.variant() != Variant::ecatse) return std::nullopt;
  return scene.present;
}

std::span<const double> head(std::span<const double> x, std::size_t n) {
  return x.subspan(0, std::min(n, x.size()));
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (epochs == 0 || batch_size == 0) throw UsageError("epochs and batch size must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  LossWeights{lambda_cls}.validate();
  if (max_targets == 0) throw UsageError("max_targets must be positive");
  if (grad_clip_norm < 0.0) throw UsageError("grad_clip_norm must be non-negative");
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["model"] = nlohmann::json::parse(config_to_json(c.model));
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["lambda_cls"] = c.lambda_cls;
  j["target_mode"] = std::string(to_string(c.target_mode));
  j["max_targets"] = c.max_targets;
  j["seed"] = c.seed;
  j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
  j["grad_clip_norm"] = c.grad_clip_norm;
  j["validation_seed"] = c.validation_seed;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(ModelWeights& weights, double learning_rate, AdamConfig config)
    : lr_(learning_rate), config_(config) {
  for (auto& [name, t] : weights.params) {
    params_.push_back(t);
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    if (!p.has_grad()) continue;
    auto values = p.mutable_values();
    const auto g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      values[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
    p.zero_grad();
  }
}

double clip_gradients(ModelWeights& weights, double max_norm) {
  double sq = 0.0;
  for (auto& [name, t] : weights.params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [name, t] : weights.params) {
      if (!t.has_grad()) continue;
      for (auto& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

std::uint64_t step_seed(std::uint64_t seed, std::size_t epoch, std::size_t position) {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL * (epoch + 1)) + position);
}

StepStats train_step(const Model& model, Adam& optimizer, ModelWeights& weights,
                     std::span<const MixtureExample* const> batch, const TrainConfig& config,
                     std::size_t epoch, std::size_t first_position) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  const bool icatse = model.variant() == Variant::icatse;
  const LossWeights loss_weights{config.lambda_cls};
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  StepStats stats;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const MixtureExample& scene = *batch[b];
    std::mt19937_64 rng(step_seed(config.seed, epoch, first_position + b));
    const TargetDraw draw = draw_targets(scene, config.target_mode, rng, config.max_targets);
    const Extraction ext = model.extract(scene.mixture, draw.hint, oracle_for(model, scene));
    const Tensor separation = loss_separation(ext.estimate, head(draw.reference, ext.estimate.numel()));
    Tensor loss = separation;
    stats.separation_loss += separation.item() * inv_batch;
    if (icatse) {
      const Tensor classification = loss_classification(model.classify(ext.stack_outputs), scene.present);
      stats.classification_loss += classification.item() * inv_batch;
      loss = loss_combined(separation, classification, loss_weights);
    }
    if (!std::isfinite(loss.item())) throw NumericError("non-finite training loss");
    scale(loss, inv_batch).backward();
  }
  stats.gradient_norm = clip_gradients(weights, config.grad_clip_norm);
  optimizer.step();
  return stats;
}

std::string epoch_log_json(const EpochLog& log) {
  nlohmann::json j;
  j["epoch"] = log.epoch;
  j["steps"] = log.steps;
  j["L_s"] = log.separation_loss;
  if (log.classification_loss) j["L_c"] = *log.classification_loss;
  j["val_si_snri_db"] = log.validation_si_snri_db;
  j["seconds"] = log.seconds;
  return j.dump();
}

TrainResult train(const TrainConfig& config, const std::vector<MixtureExample>& train_set,
                  const std::vector<MixtureExample>& validation_set,
                  const std::function<void(const EpochLog&)>& on_epoch,
                  std::optional<ModelWeights> initial) {
  config.validate();
  if (train_set.empty()) throw UsageError("training set is empty");
  for (const auto& scene : train_set) {
    if (scene.present.size() != config.model.n_classes) {
      throw UsageError("dataset has " + std::to_string(scene.present.size()) +
                       " classes but the model expects " + std::to_string(config.model.n_classes));
    }
  }
  ModelWeights weights = initial ? std::move(*initial) : initialize_weights(config.model, config.seed);
  if (!(weights.config == config.model)) throw UsageError("initial weights do not match the model config");
  const Model model(weights);  // shares parameter handles with `weights`
  ModelWeights& live = weights;
  Adam optimizer(live, config.learning_rate, config.adam);
  const auto& val = validation_set.empty() ? train_set : validation_set;

  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(step_seed(config.seed, epoch, ~std::size_t{0}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochLog log;
    log.epoch = epoch + 1;
    double ls = 0.0, lc = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const MixtureExample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(&train_set[order[i]]);
      StepStats stats;
      try {
        stats = train_step(model, optimizer, live, batch, config, epoch, start);
      } catch (const NumericError& e) {
        if (!config.diagnostic_path.empty()) save_weights(live, config.diagnostic_path);
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) +
                           ", step " + std::to_string(log.steps + 1) + ", first scene " +
                           batch.front()->record.scene_id +
                           (config.diagnostic_path.empty()
                                ? std::string(")")
                                : ", weights saved to " + config.diagnostic_path.string() + ")"));
      }
      ls += stats.separation_loss;
      lc += stats.classification_loss;
      ++log.steps;
    }
    log.separation_loss = ls / static_cast<double>(log.steps);
    if (model.variant() == Variant::icatse) log.classification_loss = lc / static_cast<double>(log.steps);
    log.validation_si_snri_db =
        mean_si_snri(model, val, config.target_mode, config.max_targets, config.validation_seed);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log.validation_si_snri_db > best) {
      best = log.validation_si_snri_db;
      result.best_epoch = log.epoch;
      result.weights = live.clone();
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

Extractor model_extractor(const Model& model) {
  return [&model](std::span<const double> mixture, const MultiHot& hint,
                  const std::optional<MultiHot>& oracle) {
    return model.extract_waveform(mixture, hint, oracle);
  };
}

std::vector<EvalRow> evaluate(const Extractor& extractor, const std::string& name,
                              const std::vector<MixtureExample>& scenes, const EvalOptions& options) {
  if (options.n_targets.empty()) throw UsageError("evaluate: no target counts requested");
  std::vector<EvalRow> rows;
  for (std::size_t n : options.n_targets) {
    if (n == 0) throw UsageError("evaluate: target count must be positive");
    EvalRow row;
    row.model = name;
    row.n_targets = n;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const MixtureExample& scene = scenes[s];
      if (popcount(scene.present) < n) continue;
      std::mt19937_64 rng(mix64(options.seed + 1000003ULL * s + n));
      const TargetDraw draw = draw_n_targets(scene, n, rng);
      std::optional<MultiHot> oracle;
      if (options.with_oracle) {
        if (options.oracle == OracleSource::truth) {
          oracle = scene.present;
        } else {
          std::vector<std::size_t> idx(scene.present.size());
          std::iota(idx.begin(), idx.end(), 0);
          std::shuffle(idx.begin(), idx.end(), rng);
          idx.resize(popcount(scene.present));
          oracle = multi_hot(scene.present.size(), idx);
        }
      }
      const auto estimate = extractor(scene.mixture, draw.hint, oracle);
      row.si_snri_db += si_snri(estimate, draw.reference, scene.mixture);
      row.snr_db += snr(estimate, draw.reference);
      ++row.scenes;
    }
    if (row.scenes > 0) {
      row.si_snri_db /= static_cast<double>(row.scenes);
      row.snr_db /= static_cast<double>(row.scenes);
    }
    rows.push_back(row);
  }
  if (rows.size() > 1) {
    EvalRow avg;
    avg.model = name;
    std::size_t columns = 0;
    for (const auto& r : rows) {
      if (r.scenes == 0) continue;
      avg.si_snri_db += r.si_snri_db;
      avg.snr_db += r.snr_db;
      avg.scenes += r.scenes;
      ++columns;
    }
    if (columns > 0) {
      avg.si_snri_db /= static_cast<double>(columns);
      avg.snr_db /= static_cast<double>(columns);
    }
    rows.push_back(avg);
  }
  return rows;
}

std::vector<EvalRow> evaluate(const Model& model, const std::vector<MixtureExample>& scenes,
                              EvalOptions options) {
  options.with_oracle = model.variant() == Variant::ecatse;
  return evaluate(model_extractor(model), std::string(to_string(model.variant())), scenes, options);
}

double mean_si_snri(const Model& model, const std::vector<MixtureExample>& scenes, TargetMode mode,
                    std::size_t max_targets, std::uint64_t seed) {
  if (scenes.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    std::mt19937_64 rng(mix64(seed + s));
    const TargetDraw draw = draw_targets(scenes[s], mode, rng, max_targets);
    const auto estimate = model.extract_waveform(scenes[s].mixture, draw.hint, oracle_for(model, scenes[s]));
    total += si_snri(estimate, draw.reference, scenes[s].mixture);
  }
  return total / static_cast<double>(scenes.size());
}

std::string eval_row_json(const EvalRow& row) {
  nlohmann::json j;
  j["model"] = row.model;
  if (row.n_targets == 0) {
    j["n_targets"] = "avg";
  } else {
    j["n_targets"] = row.n_targets;
  }
  j["si_snri_db"] = row.si_snri_db;
  j["snr_db"] = row.snr_db;
  j["scenes"] = row.scenes;
  return j.dump();
}

std::string format_eval_table(const std::vector<EvalRow>& rows) {
  if (rows.empty()) return {};
  auto column_name = [](std::size_t n) {
    if (n == 0) return std::string("Avg.");
    return std::to_string(n) + (n == 1 ? " target" : " targets");
  };
  std::ostringstream out;
  out << "SI-SNRi (dB) / SNR (dB)\n";
  out << std::left << std::setw(10) << "Model";
  for (const auto& r : rows) out << " | " << std::setw(15) << column_name(r.n_targets);
  out << "\n";
  out << std::setw(10) << rows.front().model;
  for (const auto& r : rows) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(2) << r.si_snri_db << " / " << r.snr_db;
    out << " | " << std::setw(15) << (r.scenes ? cell.str() : std::string("n/a"));
  }
  out << "\n";
  return out.str();
}

}  // namespace catse
