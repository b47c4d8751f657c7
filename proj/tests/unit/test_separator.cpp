#include <gtest/gtest.h>

#include "catse/errors.hpp"
#include "catse/model.hpp"
#include "catse/objectives.hpp"
#include "support/oracles.hpp"

using namespace catse;

namespace {

Tensor random_spectrum(std::size_t frames, std::mt19937_64& rng) {
  return oracle::random_tensor({258, frames}, rng, -2, 2);
}

}  // namespace

TEST(ModelConfig, ConditioningSites) {
  ModelConfig c;
  EXPECT_EQ(c.conditioning_sites(), 18u);
  c.n_stacks = 1;
  c.blocks_per_stack = 6;
  EXPECT_EQ(c.conditioning_sites(), 6u);
}

TEST(ModelConfig, JsonRoundTrip) {
  auto c = oracle::small_config(Variant::icatse, 13, 24);
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  EXPECT_THROW(parse_variant("tcn"), UsageError);
}

TEST(ModelConfig, ParameterCountsWithoutHeads) {
  for (std::size_t hidden : {8u, 256u}) {
    ModelConfig p, i;
    p.hidden = i.hidden = hidden;
    p.variant = Variant::pctcn;
    i.variant = Variant::icatse;
    auto count = [](const std::map<std::string, Shape>& m) {
      std::size_t n = 0;
      for (const auto& [k, s] : m) n += shape_numel(s);
      return n;
    };
    EXPECT_EQ(count(expected_parameter_shapes(i, false)), count(expected_parameter_shapes(p, false)));
    EXPECT_GT(count(expected_parameter_shapes(i, true)), count(expected_parameter_shapes(p, true)));
  }
}

TEST(Separator, OnesConditionEqualsUnconditioned) {
  std::mt19937_64 rng(1);
  const Model m(oracle::random_weights(oracle::small_config(Variant::pctcn), 1));
  Tensor s = random_spectrum(12, rng);
  auto a = m.separate(s, Tensor::full({128}, 1.0));
  auto b = separator_forward(s, Tensor(), m.config(), m.separator_params());
  for (std::size_t i = 0; i < a.mask.numel(); ++i) EXPECT_EQ(a.mask[i], b.mask[i]);
  EXPECT_EQ(a.conditioning_sites, 18u);
  EXPECT_EQ(a.stack_outputs.size(), 3u);
  for (double v : a.mask.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Separator, ZeroConditionSilencesBlockOutputs) {
  // With cond == 0 every conditioned block output is zero, so blocks 1..17
  // see zero input and their skips are input independent. The first block's
  // skip branch reads the unconditioned input projection; with that
  // projection zeroed as well, the mask must not depend on the input.
  std::mt19937_64 rng(2);
  auto w = oracle::random_weights(oracle::small_config(Variant::pctcn), 2);
  for (auto& v : w.params.at("sep.s0.b0.skip.weight").mutable_values()) v = 0.0;
  const Model m(w);
  Tensor zero = Tensor::zeros({128});
  auto a = m.separate(random_spectrum(10, rng), zero);
  auto b = m.separate(random_spectrum(10, rng), zero);
  for (std::size_t i = 0; i < a.mask.numel(); ++i) EXPECT_EQ(a.mask[i], b.mask[i]);
  for (const auto& st : a.stack_outputs)
    for (double v : st.values()) EXPECT_EQ(v, 0.0);
}

TEST(Separator, HintChangesMask) {
  std::mt19937_64 rng(9);
  const Model m(oracle::random_weights(oracle::small_config(Variant::pctcn), 9));
  auto x = oracle::random_waveform(64 * 20, rng);
  auto a = m.extract(x, multi_hot(8, {1}), std::nullopt);
  auto b = m.extract(x, multi_hot(8, {2}), std::nullopt);
  EXPECT_GT(oracle::max_abs_diff(a.mask.values(), b.mask.values()), 0.0);
}

TEST(Separator, FrameCausality) {
  std::mt19937_64 rng(3);
  const Model m(oracle::random_weights(oracle::small_config(Variant::pctcn), 3));
  Tensor cond = oracle::random_tensor({128}, rng, 0, 1);
  Tensor s = random_spectrum(20, rng);
  auto a = m.separate(s, cond);
  for (std::size_t t = 0; t + 1 < 20; t += 5) {
    Tensor s2 = s.clone();
    for (std::size_t c = 0; c < 258; ++c) s2.mutable_values()[c * 20 + t + 1] += 1.0;
    auto b = m.separate(s2, cond);
    for (std::size_t c = 0; c < 258; ++c)
      for (std::size_t u = 0; u <= t; ++u) ASSERT_EQ(a.mask[c * 20 + u], b.mask[c * 20 + u]);
  }
}

TEST(Heads, ZeroLatentsGiveHalf) {
  auto cfg = oracle::small_config(Variant::icatse);
  auto w = initialize_weights(cfg, 4);
  for (auto& [name, t] : w.params)
    if (name.find("bias") != std::string::npos)
      for (auto& v : t.mutable_values()) v = 0.0;
  const Model m(w);
  std::vector<Tensor> latents(3, Tensor::zeros({128, 40}));
  Tensor p = m.classify(latents);
  EXPECT_EQ(p.numel(), cfg.n_classes);
  for (double v : p.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Heads, DefaultClassCount) {
  ModelConfig cfg;
  cfg.variant = Variant::icatse;
  cfg.hidden = 8;
  const Model m(initialize_weights(cfg, 5));
  std::vector<Tensor> latents(3, Tensor::zeros({128, 40}));
  EXPECT_EQ(m.classify(latents).numel(), 41u);
}

TEST(Heads, GradientReachesTrunk) {
  std::mt19937_64 rng(6);
  auto cfg = oracle::small_config(Variant::icatse);
  const Model m(oracle::random_weights(cfg, 6));
  auto x = oracle::random_waveform(64 * 40, rng);
  auto ext = m.extract(x, multi_hot(8, {1}), std::nullopt);
  loss_classification(m.classify(ext.stack_outputs), multi_hot(8, {1, 5})).backward();
  const Tensor& w = m.weights().params.at("sep.s0.b0.in.weight");
  ASSERT_TRUE(w.has_grad());
  double mag = 0.0;
  for (double g : w.grad()) mag += std::abs(g);
  EXPECT_GT(mag, 0.0);
}

TEST(Model, OracleContract) {
  std::mt19937_64 rng(7);
  auto x = oracle::random_waveform(64 * 10, rng);
  const Model p(initialize_weights(oracle::small_config(Variant::pctcn), 1));
  const Model e(initialize_weights(oracle::small_config(Variant::ecatse), 1));
  EXPECT_THROW(p.extract(x, multi_hot(8, {1}), multi_hot(8, {1, 2})), UsageError);
  EXPECT_THROW(e.extract(x, multi_hot(8, {1}), std::nullopt), UsageError);
  EXPECT_NO_THROW(e.extract(x, multi_hot(8, {1}), multi_hot(8, {1, 2})));
  EXPECT_THROW(p.classify({}), UsageError);
}

TEST(Model, EndToEndSeparationGradient) {
  std::mt19937_64 rng(8);
  for (auto variant : {Variant::pctcn, Variant::ecatse}) {
    const Model m(oracle::random_weights(oracle::small_config(variant, 6, 4), 8));
    auto x = oracle::random_waveform(64 * 7, rng);
    auto ref = oracle::random_waveform(64 * 8, rng);
    std::optional<MultiHot> o;
    if (variant == Variant::ecatse) o = multi_hot(6, {1, 2, 4});
    auto loss = [&] {
      auto ext = m.extract(x, multi_hot(6, {2}), o);
      return loss_separation(ext.estimate, std::span<const double>(ref).first(ext.estimate.numel()));
    };
    auto res = oracle::fd_check(loss, oracle::named(m.weights()), 2);
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
  }
}
