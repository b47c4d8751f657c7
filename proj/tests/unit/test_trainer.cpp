#include <gtest/gtest.h>

#include <cmath>

#include "catse/dataset.hpp"
#include "catse/errors.hpp"
#include "catse/filterbank.hpp"
#include "catse/trainer.hpp"
#include "support/oracles.hpp"

using namespace catse;

namespace {

// Short scenes keep the trainer tests fast.
std::vector<MixtureExample> tiny_scenes(std::size_t n, std::uint64_t seed, std::size_t classes = 6) {
  SceneSpec spec;
  spec.seed = seed;
  spec.scene_duration_s = 1.0;
  spec.min_fg_duration_s = 0.4;
  spec.max_fg_duration_s = 0.8;
  spec.min_fg_classes = std::min<std::size_t>(3, classes);
  spec.max_fg_classes = std::min<std::size_t>(5, classes);
  return generate_dataset(n, ClassVocabulary::numbered(classes), spec).scenes;
}

TrainConfig tiny_config(Variant v) {
  TrainConfig c;
  c.model = oracle::small_config(v, 6, 8);
  c.epochs = 1;
  c.batch_size = 2;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps).
  ModelWeights w;
  w.params.emplace("p", Tensor::vector({1.0, -2.0}, true));
  Adam opt(w, 0.1);
  sum(mul(w.params.at("p"), Tensor::vector({3.0, -0.5}))).backward();
  opt.step();
  EXPECT_NEAR(w.params.at("p")[0], 1.0 - 0.1 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w.params.at("p")[1], -2.0 + 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_FALSE(w.params.at("p").has_grad() && w.params.at("p").grad()[0] != 0.0);
}

TEST(Trainer, ZeroLambdaIcatseMatchesPctcnTrunk) {
  auto scenes = tiny_scenes(2, 1);
  auto pc = tiny_config(Variant::pctcn);
  auto ic = tiny_config(Variant::icatse);
  ic.lambda_cls = 0.0;
  auto wp = initialize_weights(pc.model, pc.seed);
  auto wi = initialize_weights(ic.model, ic.seed);
  const Model mp(wp), mi(wi);
  Adam op(wp, pc.learning_rate), oi(wi, ic.learning_rate);
  std::vector<const MixtureExample*> batch{&scenes[0], &scenes[1]};
  train_step(mp, op, wp, batch, pc, 0, 0);
  auto stats = train_step(mi, oi, wi, batch, ic, 0, 0);
  EXPECT_GT(stats.classification_loss, 0.0);
  for (const auto& [name, t] : wp.params) {
    auto a = t.values(), b = wi.params.at(name).values();
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << name;
  }
}

TEST(Trainer, EcatseSeesPresentClassesAsOracle) {
  // The oracle embedding must equal the encoder applied to the present set.
  auto scenes = tiny_scenes(1, 2);
  auto cfg = tiny_config(Variant::ecatse);
  auto w = initialize_weights(cfg.model, 1);
  const Model m(w);
  std::mt19937_64 rng(step_seed(cfg.seed, 0, 0));
  auto draw = draw_targets(scenes[0], cfg.target_mode, rng, cfg.max_targets);
  auto expected = m.extract(scenes[0].mixture, draw.hint, scenes[0].present).estimate;
  const double l_expected = loss_separation(expected, std::span<const double>(draw.reference).first(expected.numel())).item();
  Adam opt(w, cfg.learning_rate);
  std::vector<const MixtureExample*> batch{&scenes[0]};
  auto stats = train_step(m, opt, w, batch, cfg, 0, 0);
  EXPECT_DOUBLE_EQ(stats.separation_loss, l_expected);
}

TEST(Trainer, SeededRunsAreBitIdentical) {
  auto scenes = tiny_scenes(3, 4);
  auto cfg = tiny_config(Variant::icatse);
  auto a = train(cfg, scenes, {});
  auto b = train(cfg, scenes, {});
  EXPECT_EQ(serialize_weights(a.weights), serialize_weights(b.weights));
  ASSERT_EQ(a.log.size(), 1u);
  EXPECT_TRUE(a.log[0].classification_loss.has_value());
  EXPECT_EQ(a.log[0].separation_loss, b.log[0].separation_loss);
}

TEST(Trainer, LossDecreasesOnFixedSet) {
  auto scenes = tiny_scenes(8, 5, 2);
  for (auto& s : scenes) ASSERT_GE(popcount(s.present), 1u);
  auto cfg = tiny_config(Variant::pctcn);
  cfg.model = oracle::small_config(Variant::pctcn, 2, 16);
  cfg.target_mode = TargetMode::single;
  cfg.batch_size = 8;
  auto w = initialize_weights(cfg.model, cfg.seed);
  const Model m(w);
  Adam opt(w, cfg.learning_rate);
  std::vector<const MixtureExample*> batch;
  for (auto& s : scenes) batch.push_back(&s);
  std::vector<double> losses;
  for (std::size_t step = 0; step < 200; ++step)
    losses.push_back(train_step(m, opt, w, batch, cfg, 0, 0).separation_loss);
  const double head = (losses[0] + losses[1] + losses[2]) / 3.0;
  const double tail = (losses[197] + losses[198] + losses[199]) / 3.0;
  EXPECT_LT(tail, head - 1.0);
}

TEST(Trainer, ValidatesConfig) {
  auto cfg = tiny_config(Variant::pctcn);
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = tiny_config(Variant::pctcn);
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = tiny_config(Variant::pctcn);
  EXPECT_THROW(train(cfg, tiny_scenes(1, 1, 8), {}), UsageError);
}

TEST(Evaluate, IdentityExtractorScoresZero) {
  auto scenes = tiny_scenes(4, 6);
  Filterbank fb;
  Extractor identity = [&](std::span<const double> x, const MultiHot&, const std::optional<MultiHot>&) {
    // Unit mask: synthesize(analyze(x)), exact except at the clip edges.
    Tensor y = fb.synthesize(fb.analyze(x));
    std::vector<double> out(x.size(), 0.0);
    std::copy_n(y.values().begin(), std::min(out.size(), y.numel()), out.begin());
    return out;
  };
  auto rows = evaluate(identity, "identity", scenes, EvalOptions{});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_NEAR(r.si_snri_db, 0.0, 0.05) << r.n_targets;
}

TEST(Evaluate, TableLayoutAndDeterminism) {
  auto scenes = tiny_scenes(3, 7);
  const Model m(initialize_weights(oracle::small_config(Variant::ecatse, 6, 8), 1));
  auto a = evaluate(m, scenes);
  auto b = evaluate(m, scenes);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].si_snri_db, b[i].si_snri_db);
    EXPECT_EQ(a[i].snr_db, b[i].snr_db);
  }
  EXPECT_EQ(a.back().n_targets, 0u);
  EXPECT_NEAR(a.back().si_snri_db, (a[0].si_snri_db + a[1].si_snri_db + a[2].si_snri_db) / 3.0, 1e-12);
  const std::string table = format_eval_table(a);
  for (const char* col : {"1 target", "2 targets", "3 targets", "Avg."})
    EXPECT_NE(table.find(col), std::string::npos) << col;
  EXPECT_NE(table.find("SI-SNRi (dB) / SNR (dB)"), std::string::npos);
  EXPECT_NE(eval_row_json(a.back()).find("\"avg\""), std::string::npos);
}

TEST(Evaluate, HintPopcountMatchesRequestedTargets) {
  auto scenes = tiny_scenes(3, 8);
  std::vector<std::size_t> seen;
  Extractor spy = [&](std::span<const double> x, const MultiHot& hint, const std::optional<MultiHot>&) {
    seen.push_back(popcount(hint));
    return std::vector<double>(x.begin(), x.end());
  };
  EvalOptions opt;
  opt.n_targets = {2};
  auto rows = evaluate(spy, "spy", scenes, opt);
  ASSERT_EQ(rows.size(), 1u);
  for (auto n : seen) EXPECT_EQ(n, 2u);
}
