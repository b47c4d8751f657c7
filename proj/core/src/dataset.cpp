#include "catse/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "catse/errors.hpp"
#include "catse/wav.hpp"

namespace catse {

namespace {

std::string scene_id(std::size_t index) {
  std::ostringstream out;
  out << std::setw(6) << std::setfill('0') << index;
  return out.str();
}

std::string spec_to_json(const SceneSpec& s) {
  nlohmann::json j;
  j["min_fg_classes"] = s.min_fg_classes;
  j["max_fg_classes"] = s.max_fg_classes;
  j["min_fg_duration_s"] = s.min_fg_duration_s;
  j["max_fg_duration_s"] = s.max_fg_duration_s;
  j["scene_duration_s"] = s.scene_duration_s;
  j["min_snr_db"] = s.min_snr_db;
  j["max_snr_db"] = s.max_snr_db;
  j["sample_rate"] = s.sample_rate;
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

SceneSpec spec_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SceneSpec s;
    s.min_fg_classes = j.at("min_fg_classes").get<std::size_t>();
    s.max_fg_classes = j.at("max_fg_classes").get<std::size_t>();
    s.min_fg_duration_s = j.at("min_fg_duration_s").get<double>();
    s.max_fg_duration_s = j.at("max_fg_duration_s").get<double>();
    s.scene_duration_s = j.at("scene_duration_s").get<double>();
    s.min_snr_db = j.at("min_snr_db").get<double>();
    s.max_snr_db = j.at("max_snr_db").get<double>();
    s.sample_rate = j.at("sample_rate").get<std::uint32_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed spec.json: ") + e.what());
  }
}

}  // namespace

std::uint64_t scene_seed(std::uint64_t base, std::size_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset generate_dataset(std::size_t count, const ClassVocabulary& vocabulary, const SceneSpec& spec,
                         const SourcePool* pool) {
  Dataset ds;
  ds.vocabulary = vocabulary;
  ds.spec = spec;
  ds.scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SceneSpec s = spec;
    s.seed = scene_seed(spec.seed, i);
    MixtureExample ex = compose_scene(s, vocabulary, pool);
    ex.record.scene_id = scene_id(i);
    ds.scenes.push_back(std::move(ex));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "scenes");
  std::string manifest;
  for (const auto& ex : dataset.scenes) {
    manifest += manifest_line(ex.record) + "\n";
    const fs::path scene_dir = dir / "scenes" / ex.record.scene_id;
    fs::create_directories(scene_dir);
    write_wav(scene_dir / "mixture.wav", ex.mixture);
    write_wav(scene_dir / "background.wav", ex.background);
    for (const auto& [cls, stem] : ex.stems) {
      write_wav(scene_dir / ("stem_" + dataset.vocabulary.name(cls) + ".wav"), stem);
    }
  }
  std::string vocab;
  for (const auto& n : dataset.vocabulary.names()) vocab += n + "\n";
  write_file_atomic(dir / "vocab.txt", vocab);
  write_file_atomic(dir / "spec.json", spec_to_json(dataset.spec));
  write_file_atomic(dir / "manifest.jsonl", manifest);
}

std::vector<SceneRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<SceneRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(parse_manifest_line(line));
  }
  return records;
}

ClassVocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) names.push_back(line);
  }
  if (names.empty()) throw DataError("vocabulary " + path.string() + " is empty");
  return ClassVocabulary(std::move(names));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.vocabulary = read_vocabulary(dir / "vocab.txt");
  ds.spec = spec_from_json(read_file(dir / "spec.json"));
  for (auto& rec : read_manifest(dir / "manifest.jsonl")) {
    MixtureExample ex;
    const fs::path scene_dir = dir / "scenes" / rec.scene_id;
    ex.mixture = read_wav(scene_dir / "mixture.wav").samples;
    ex.background = read_wav(scene_dir / "background.wav").samples;
    ex.present.assign(ds.vocabulary.size(), 0);
    for (std::size_t cls : rec.classes) {
      if (cls >= ds.vocabulary.size()) {
        throw DataError("scene " + rec.scene_id + " references unknown class " + std::to_string(cls));
      }
      auto stem = read_wav(scene_dir / ("stem_" + ds.vocabulary.name(cls) + ".wav")).samples;
      if (stem.size() != ex.mixture.size()) {
        throw DataError("scene " + rec.scene_id + ": stem length differs from mixture");
      }
      ex.stems.emplace(cls, std::move(stem));
      ex.present[cls] = 1;
    }
    // Rebuild the mixture from the stored parts so it is exactly their sum;
    // mixture.wav only serves as a consistency check.
    std::vector<double> rebuilt = ex.background;
    for (const auto& [cls, stem] : ex.stems)
      for (std::size_t i = 0; i < rebuilt.size(); ++i) rebuilt[i] += stem[i];
    for (std::size_t i = 0; i < rebuilt.size(); ++i) {
      if (std::abs(rebuilt[i] - ex.mixture[i]) > 1e-5) {
        throw DataError("scene " + rec.scene_id + ": mixture.wav disagrees with background + stems");
      }
    }
    ex.mixture = std::move(rebuilt);
    ex.record = std::move(rec);
    ds.scenes.push_back(std::move(ex));
  }
  if (ds.scenes.empty()) throw DataError("dataset at " + dir.string() + " has no scenes");
  return ds;
}

std::pair<std::vector<MixtureExample>, std::vector<MixtureExample>> split_holdout(
    const std::vector<MixtureExample>& scenes, double fraction) {
  std::size_t held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(scenes.size())));
  if (fraction > 0.0 && held == 0 && scenes.size() >= 2) held = 1;
  held = std::min(held, scenes.size());
  const auto cut = scenes.begin() + static_cast<std::ptrdiff_t>(scenes.size() - held);
  return {std::vector<MixtureExample>(scenes.begin(), cut), std::vector<MixtureExample>(cut, scenes.end())};
}

}  // namespace catse
