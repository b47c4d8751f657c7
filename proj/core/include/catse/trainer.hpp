#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catse/model.hpp"
#include "catse/objectives.hpp"
#include "catse/scenegen.hpp"

namespace catse {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  ModelConfig model;  // model.variant selects pctcn / ecatse / icatse
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  double lambda_cls = 0.5;  // only read for icatse
  TargetMode target_mode = TargetMode::multi;
  std::size_t max_targets = 3;
  std::uint64_t seed = 0;
  AdamConfig adam;
  double grad_clip_norm = 5.0;  // global L2 norm; 0 disables clipping
  std::uint64_t validation_seed = 12345;
  // When set, weights are written here before a non-finite loss aborts training.
  std::filesystem::path diagnostic_path;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& config);

class Adam {
 public:
  Adam(ModelWeights& weights, double learning_rate, AdamConfig config = {});

  // Applies one update from the accumulated gradients, then zeroes them.
  void step();
  std::size_t steps() const { return steps_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_;
  AdamConfig config_;
  std::size_t steps_ = 0;
};

// Global gradient L2 norm over every parameter; rescales gradients so the norm
// does not exceed `max_norm` (when max_norm > 0). Returns the pre-clip norm.
double clip_gradients(ModelWeights& weights, double max_norm);

struct StepStats {
  double separation_loss = 0.0;      // mean L_s over the batch
  double classification_loss = 0.0;  // mean L_c (icatse only)
  double gradient_norm = 0.0;
};

// Per-scene randomness of the training stream.
std::uint64_t step_seed(std::uint64_t seed, std::size_t epoch, std::size_t position);

// Forward + backward over one batch (gradient accumulation), clip, Adam step.
// eCATSE receives each scene's present classes as oracle context.
StepStats train_step(const Model& model, Adam& optimizer, ModelWeights& weights,
                     std::span<const MixtureExample* const> batch, const TrainConfig& config,
                     std::size_t epoch, std::size_t first_position);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double separation_loss = 0.0;
  std::optional<double> classification_loss;
  double validation_si_snri_db = 0.0;
  double seconds = 0.0;
};

std::string epoch_log_json(const EpochLog& log);

struct TrainResult {
  ModelWeights weights;  // best epoch by validation SI-SNRi
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

// Trains from `initial` (or a fresh seeded init). With an empty validation
// set the training scenes are used for model selection.
TrainResult train(const TrainConfig& config, const std::vector<MixtureExample>& train_set,
                  const std::vector<MixtureExample>& validation_set,
                  const std::function<void(const EpochLog&)>& on_epoch = {},
                  std::optional<ModelWeights> initial = std::nullopt);

// ---------------------------------------------------------------------------
// Evaluation

enum class OracleSource {
  truth,   // present classes of the scene
  random,  // seeded random multi-hot of the same popcount (corruption probe)
};

using Extractor = std::function<std::vector<double>(
    std::span<const double> mixture, const MultiHot& hint, const std::optional<MultiHot>& oracle)>;

Extractor model_extractor(const Model& model);

struct EvalRow {
  std::string model;
  std::size_t n_targets = 0;  // 0 marks the average row
  double si_snri_db = 0.0;
  double snr_db = 0.0;
  std::size_t scenes = 0;
};

struct EvalOptions {
  std::vector<std::size_t> n_targets{1, 2, 3};
  std::uint64_t seed = 2024;
  OracleSource oracle = OracleSource::truth;
  bool with_oracle = false;  // pass an oracle vector to the extractor
};

// Mean SI-SNRi / SNR per requested target count plus an average row (mean of
// the per-count means) when more than one count is requested. Scenes with
// fewer present classes than the count are skipped for that column.
std::vector<EvalRow> evaluate(const Extractor& extractor, const std::string& name,
                              const std::vector<MixtureExample>& scenes, const EvalOptions& options);
std::vector<EvalRow> evaluate(const Model& model, const std::vector<MixtureExample>& scenes,
                              EvalOptions options = {});

// Validation metric: mean SI-SNRi with targets drawn per `mode`.
double mean_si_snri(const Model& model, const std::vector<MixtureExample>& scenes, TargetMode mode,
                    std::size_t max_targets, std::uint64_t seed);

std::string eval_row_json(const EvalRow& row);
// "SI-SNRi (dB) / SNR (dB)" table with one column per target count and Avg.
std::string format_eval_table(const std::vector<EvalRow>& rows);

}  // namespace catse
