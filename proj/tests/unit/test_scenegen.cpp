#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "catse/dataset.hpp"
#include "catse/errors.hpp"
#include "catse/scenegen.hpp"
#include "catse/wav.hpp"
#include "support/oracles.hpp"
#include "support/scene_checks.hpp"

using namespace catse;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("catse_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(SynthSource, DeterministicUnitRms) {
  for (std::size_t k = 0; k < 10; ++k) {
    auto a = synth_source(k, 1.5, 42);
    auto b = synth_source(k, 1.5, 42);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 24000u);
    EXPECT_NEAR(oracle::rms(a), 1.0, 1e-6);
  }
}

TEST(SynthSource, DistinctClassesAreDecorrelated) {
  const std::size_t n_classes = kDefaultClasses;
  std::vector<std::vector<double>> src;
  for (std::size_t k = 0; k < n_classes; ++k) src.push_back(synth_source(k, 0.5, 7));
  double worst = 0.0;
  for (std::size_t a = 0; a < n_classes; ++a)
    for (std::size_t b = a + 1; b < n_classes; ++b)
      worst = std::max(worst, scene_checks::xcorr_peak(src[a], src[b], 256));
  EXPECT_LT(worst, 0.9);
}

TEST(ComposeScene, Contracts) {
  auto vocab = ClassVocabulary::numbered(10);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    auto ex = compose_scene(spec, vocab);
    const auto c = scene_checks::check_scene(ex, spec);
    EXPECT_TRUE(c.sum_exact) << seed;
    EXPECT_LT(c.max_residual, 1e-15) << seed;
    EXPECT_LT(c.max_snr_error_db, 0.1) << seed;
    EXPECT_GE(popcount(ex.present), 3u);
    EXPECT_LE(popcount(ex.present), 5u);
    EXPECT_EQ(ex.mixture.size(), 96000u);
  }
}

TEST(ComposeScene, RenderFromRecordIsIdentical) {
  SceneSpec spec;
  spec.seed = 9;
  auto vocab = ClassVocabulary::numbered(8);
  auto ex = compose_scene(spec, vocab);
  auto again = render_scene(parse_manifest_line(manifest_line(ex.record)), spec, 8);
  EXPECT_EQ(again.record, ex.record);
  EXPECT_EQ(again.mixture, ex.mixture);
}

TEST(DrawTargets, ModesAndSubset) {
  SceneSpec spec;
  spec.seed = 3;
  auto ex = compose_scene(spec, ClassVocabulary::numbered(8));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    auto single = draw_targets(ex, TargetMode::single, rng);
    EXPECT_EQ(popcount(single.hint), 1u);
    auto multi = draw_targets(ex, TargetMode::multi, rng);
    EXPECT_GE(popcount(multi.hint), 1u);
    EXPECT_LE(popcount(multi.hint), 3u);
    EXPECT_TRUE(is_subset(multi.hint, ex.present));
    std::vector<double> ref(ex.mixture.size(), 0.0);
    for (std::size_t k : active_indices(multi.hint))
      for (std::size_t j = 0; j < ref.size(); ++j) ref[j] += ex.stems.at(k)[j];
    EXPECT_EQ(ref, multi.reference);
  }
  for (std::size_t n = 1; n <= 3; ++n) EXPECT_EQ(popcount(draw_n_targets(ex, n, rng).hint), n);
  EXPECT_THROW(draw_n_targets(ex, 6, rng), UsageError);
}

TEST(Corpus, EmptyDirectoryIsAnError) {
  auto dir = temp_dir("empty");
  EXPECT_THROW(ingest_corpus(dir), DataError);
  fs::remove_all(dir);
}

TEST(Corpus, OneClipPerClassKeepsContracts) {
  auto dir = temp_dir("corpus");
  const std::vector<std::string> names{"bell", "drum", "horn", "rain"};
  for (std::size_t k = 0; k < names.size(); ++k) {
    fs::create_directories(dir / names[k]);
    auto clip = synth_source(k + 11, 5.5, 3);
    for (auto& v : clip) v *= 0.2;
    write_wav(dir / names[k] / "clip.wav", clip);
  }
  auto pool = ingest_corpus(dir);
  EXPECT_EQ(pool.vocabulary.names(), names);
  SceneSpec spec;
  spec.max_fg_classes = 4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    auto ex = compose_scene(spec, pool.vocabulary, &pool);
    const auto c = scene_checks::check_scene(ex, spec);
    EXPECT_TRUE(c.sum_exact);
    EXPECT_LT(c.max_snr_error_db, 0.1);
  }
  fs::remove_all(dir);
}

TEST(Dataset, WriteLoadRoundTrip) {
  auto dir = temp_dir("dataset");
  SceneSpec spec;
  spec.seed = 5;
  auto ds = generate_dataset(4, ClassVocabulary::numbered(8), spec);
  write_dataset(ds, dir);
  EXPECT_TRUE(fs::exists(dir / "manifest.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "scenes" / ds.scenes[0].record.scene_id / "mixture.wav"));
  auto back = load_dataset(dir);
  ASSERT_EQ(back.scenes.size(), 4u);
  EXPECT_EQ(back.vocabulary.names(), ds.vocabulary.names());
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.scenes[i].record, ds.scenes[i].record);
    EXPECT_EQ(back.scenes[i].present, ds.scenes[i].present);
    // Audio is stored as 32-bit float.
    EXPECT_LT(oracle::max_abs_diff(back.scenes[i].mixture, ds.scenes[i].mixture), 1e-7);
    EXPECT_TRUE(scene_checks::check_scene(back.scenes[i], back.spec).sum_exact);
  }
  fs::remove_all(dir);
}

TEST(Dataset, DeterministicAndHoldout) {
  SceneSpec spec;
  spec.seed = 11;
  auto a = generate_dataset(5, ClassVocabulary::numbered(8), spec);
  auto b = generate_dataset(5, ClassVocabulary::numbered(8), spec);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.scenes[i].mixture, b.scenes[i].mixture);
  auto [train, held] = split_holdout(a.scenes, 0.2);
  EXPECT_EQ(train.size(), 4u);
  EXPECT_EQ(held.size(), 1u);
  EXPECT_EQ(held[0].record.scene_id, a.scenes[4].record.scene_id);
}
