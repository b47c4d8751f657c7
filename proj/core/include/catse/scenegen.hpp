#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "catse/condition.hpp"

namespace catse {

// Soundscape mixing parameters. Defaults reproduce the training protocol:
// 3-5 distinct foreground classes, 3-5 s events on a 6 s background, each
// event 15-25 dB above the background over its own span.
struct SceneSpec {
  std::size_t min_fg_classes = 3;
  std::size_t max_fg_classes = 5;
  double min_fg_duration_s = 3.0;
  double max_fg_duration_s = 5.0;
  double scene_duration_s = 6.0;
  double min_snr_db = 15.0;
  double max_snr_db = 25.0;
  std::uint32_t sample_rate = 16000;
  std::uint64_t seed = 0;

  std::size_t scene_samples() const;
  void validate(std::size_t n_classes) const;
};

// Everything needed to rebuild one scene; serialized as one manifest line.
struct SceneRecord {
  std::string scene_id;
  std::uint64_t seed = 0;
  std::vector<std::size_t> classes;
  std::vector<double> offsets_s;
  std::vector<double> durations_s;
  std::vector<double> snrs_db;
  std::vector<double> gains;  // final linear gain applied to each RMS-1 source
  std::vector<std::uint64_t> source_seeds;
  std::size_t bg_id = 0;
  double bg_gain = 0.0;

  bool operator==(const SceneRecord&) const = default;
};

struct MixtureExample {
  SceneRecord record;
  std::vector<double> mixture;
  std::vector<double> background;
  std::map<std::size_t, std::vector<double>> stems;  // class -> placed, scaled stem
  MultiHot present;                                   // oracle context
};

enum class TargetMode { multi, single };

std::string_view to_string(TargetMode mode);
TargetMode parse_target_mode(std::string_view text);

struct TargetDraw {
  MultiHot hint;
  std::vector<double> reference;  // sum of the selected stems
};

// Deterministic RMS-1 source for a class. Class k follows recipe family
// k mod 5 (harmonic stack, chirp, AM noise, band noise, click train) with
// k-dependent parameters.
std::vector<double> synth_source(std::size_t class_id, double duration_s, std::uint64_t seed,
                                 std::uint32_t sample_rate = 16000);

inline constexpr std::size_t kBackgroundVariants = 4;
// RMS-1 coloured-noise background; `bg_id` selects the spectral family.
std::vector<double> synth_background(std::size_t bg_id, std::size_t samples, std::uint64_t seed);

// Per-class clips loaded from disk (RMS-normalized).
struct SourcePool {
  ClassVocabulary vocabulary;
  std::map<std::size_t, std::vector<std::vector<double>>> clips;

  bool empty() const { return clips.empty(); }
};

// Directory-per-class corpus: <root>/<class name>/*.wav, mono 16 kHz.
// Class names come from the sorted subdirectory names.
SourcePool ingest_corpus(const std::filesystem::path& root);

// Builds one scene from spec.seed. With a pool, foreground events are crops
// of pooled clips instead of synthetic sources.
MixtureExample compose_scene(const SceneSpec& spec, const ClassVocabulary& vocabulary,
                             const SourcePool* pool = nullptr);

// Rebuilds the waveforms of a scene from its record alone.
MixtureExample render_scene(const SceneRecord& record, const SceneSpec& spec,
                            std::size_t n_classes, const SourcePool* pool = nullptr);

// Picks targets among the present classes: exactly one in single mode,
// uniformly 1..min(max_targets, present) in multi mode.
TargetDraw draw_targets(const MixtureExample& example, TargetMode mode, std::mt19937_64& rng,
                        std::size_t max_targets = 3);
// Exactly `count` targets chosen uniformly without replacement.
TargetDraw draw_n_targets(const MixtureExample& example, std::size_t count, std::mt19937_64& rng);
TargetDraw select_targets(const MixtureExample& example, const MultiHot& selection);

std::string manifest_line(const SceneRecord& record);
SceneRecord parse_manifest_line(std::string_view line);

}  // namespace catse
