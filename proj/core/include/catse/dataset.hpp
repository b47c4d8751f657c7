#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "catse/scenegen.hpp"

namespace catse {

struct Dataset {
  ClassVocabulary vocabulary;
  SceneSpec spec;  // spec.seed is the base seed the scenes derive from
  std::vector<MixtureExample> scenes;
};

// Seed of scene `index` under base seed `base`.
std::uint64_t scene_seed(std::uint64_t base, std::size_t index);

// Pure function of (count, vocabulary, spec, pool contents).
Dataset generate_dataset(std::size_t count, const ClassVocabulary& vocabulary, const SceneSpec& spec,
                         const SourcePool* pool = nullptr);

// Layout:
//   <dir>/manifest.jsonl   one SceneRecord per line
//   <dir>/vocab.txt        one class name per line
//   <dir>/spec.json        scene spec
//   <dir>/scenes/<id>/mixture.wav, background.wav, stem_<class>.wav (32-bit float)
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

std::vector<SceneRecord> read_manifest(const std::filesystem::path& path);
ClassVocabulary read_vocabulary(const std::filesystem::path& path);

// Deterministic split: the last `count` scenes (at least one when the set
// has two or more scenes) form the held-out part.
std::pair<std::vector<MixtureExample>, std::vector<MixtureExample>> split_holdout(
    const std::vector<MixtureExample>& scenes, double fraction);

}  // namespace catse
