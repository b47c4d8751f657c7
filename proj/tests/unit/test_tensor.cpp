#include <gtest/gtest.h>

#include <cmath>

#include "catse/errors.hpp"
#include "catse/tensor.hpp"
#include "support/oracles.hpp"

using namespace catse;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

constexpr double kFdTol = 1e-4;

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
}

TEST(Tensor, NonFiniteResultIsAnError) {
  Tensor a = Tensor::vector({1e308});
  EXPECT_THROW(scale(a, 10.0), NumericError);
}

TEST(Conv1d, IdentityKernel) {
  std::mt19937_64 rng(1);
  Tensor x = oracle::random_tensor({3, 7}, rng);
  std::vector<double> w(9, 0.0);
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  Tensor y = conv1d_causal(x, Tensor({3, 3, 1}, w), Tensor::zeros({3}));
  EXPECT_EQ(vals(y), vals(x));
}

TEST(Conv1d, HandConvolvedDilatedCase) {
  Tensor x({1, 4}, {1, 2, 3, 4});
  Tensor y = conv1d_causal(x, Tensor({1, 1, 2}, {1, 1}), Tensor::zeros({1}), 2);
  EXPECT_EQ(vals(y), (std::vector<double>{1, 2, 4, 6}));
}

TEST(Conv1d, MatchesDirectConvolution) {
  std::mt19937_64 rng(2);
  for (std::size_t groups : {1u, 2u, 4u}) {
    for (std::size_t dilation : {1u, 3u}) {
      const std::size_t cin = 4, cout = 4, k = 3, t = 11;
      Tensor x = oracle::random_tensor({cin, t}, rng);
      Tensor w = oracle::random_tensor({cout, cin / groups, k}, rng);
      Tensor b = oracle::random_tensor({cout}, rng);
      Tensor y = conv1d_causal(x, w, b, dilation, groups);
      auto ref = oracle::naive_conv1d(vals(x), cin, t, vals(w), cout, k, vals(b), dilation, groups);
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
    }
  }
}

TEST(Conv1d, FutureFrameDoesNotLeak) {
  std::mt19937_64 rng(3);
  Tensor x = oracle::random_tensor({2, 10}, rng);
  Tensor w = oracle::random_tensor({2, 2, 3}, rng);
  Tensor b = oracle::random_tensor({2}, rng);
  Tensor y1 = conv1d_causal(x, w, b, 2);
  Tensor x2 = x.clone();
  x2.mutable_values()[0 * 10 + 6] += 5.0;
  x2.mutable_values()[1 * 10 + 6] -= 5.0;
  Tensor y2 = conv1d_causal(x2, w, b, 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t <= 5; ++t) EXPECT_EQ(y1[c * 10 + t], y2[c * 10 + t]);
}

TEST(Conv1d, RejectsBadShapes) {
  Tensor x = Tensor::zeros({3, 5});
  EXPECT_THROW(conv1d_causal(x, Tensor::zeros({2, 2, 1}), Tensor::zeros({2})), DimensionError);
  EXPECT_THROW(conv1d_causal(x, Tensor::zeros({2, 3, 1}), Tensor::zeros({2}), 0), UsageError);
}

TEST(FullyConnected, Cases) {
  Tensor y = fully_connected(Tensor::vector({1, 2}), Tensor({2, 2}, {1, 1, 1, -1}), Tensor::vector({0, 1}));
  EXPECT_EQ(vals(y), (std::vector<double>{3, 0}));
  Tensor eye({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(vals(fully_connected(Tensor::vector({4, -2}), eye, Tensor::zeros({2}))),
            (std::vector<double>{4, -2}));
  EXPECT_EQ(vals(fully_connected(Tensor::zeros({2}), Tensor({2, 2}, {1, 2, 3, 4}), Tensor::vector({7, 8}))),
            (std::vector<double>{7, 8}));
}

TEST(Activations, UnitValues) {
  EXPECT_DOUBLE_EQ(prelu(Tensor::vector({-4}), Tensor::vector({0.25}))[0], -1.0);
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::vector({0}))[0], 0.5);
  EXPECT_DOUBLE_EQ(relu(Tensor::vector({-3}))[0], 0.0);
  EXPECT_DOUBLE_EQ(leaky_relu(Tensor::vector({-2}))[0], -0.02);
  EXPECT_DOUBLE_EQ(activation(Tensor::vector({-4}), ActivationKind::prelu, Tensor::vector({0.25}))[0], -1.0);
}

TEST(Activations, SigmoidGradientAtZero) {
  Tensor x = Tensor::vector({0.0}, true);
  sum(sigmoid(x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Cgln, ConstantInputGivesZeros) {
  Tensor y = cgln(Tensor::full({3, 5}, 5.0), Tensor::full({3}, 1.0), Tensor::zeros({3}));
  for (double v : y.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Cgln, ZeroGainGivesBias) {
  std::mt19937_64 rng(4);
  Tensor bias = Tensor::vector({0.5, -1.5});
  Tensor y = cgln(oracle::random_tensor({2, 6}, rng), Tensor::zeros({2}), bias);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(y[c * 6 + t], bias[c]);
}

TEST(Cgln, MatchesPrefixBruteForce) {
  std::mt19937_64 rng(5);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    Tensor x = oracle::random_tensor({2, 4}, rng, -3, 3);
    Tensor g = oracle::random_tensor({2}, rng);
    Tensor b = oracle::random_tensor({2}, rng);
    Tensor y = cgln(x, g, b);
    auto ref = oracle::cgln_bruteforce(vals(x), 2, 4, vals(g), vals(b), kCglnEps);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-9);
  }
}

TEST(Maxpool, Cases) {
  EXPECT_EQ(vals(maxpool1d(Tensor({1, 4}, {1, 3, 2, 5}), 2)), (std::vector<double>{3, 5}));
  EXPECT_EQ(vals(maxpool1d(Tensor({1, 3}, {1, -3, 2}), 1)), (std::vector<double>{1, -3, 2}));
  EXPECT_EQ(vals(maxpool1d(Tensor({1, 2}, {-1, -2}), 2)), (std::vector<double>{-1}));
  EXPECT_THROW(maxpool1d(Tensor({1, 2}, {1, 2}), 3), DimensionError);
}

TEST(Elementwise, IdentitiesAndConcat) {
  std::mt19937_64 rng(6);
  Tensor x = oracle::random_tensor({3, 4}, rng);
  EXPECT_EQ(vals(mul(x, Tensor::full({3}, 1.0))), vals(x));
  EXPECT_EQ(vals(add(x, Tensor::zeros({3, 4}))), vals(x));
  Tensor c = concat({x, oracle::random_tensor({2, 4}, rng)}, 0);
  EXPECT_EQ(c.shape(), (Shape{5, 4}));
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(c[i], x[i]);
  EXPECT_THROW(concat({x, Tensor::zeros({2, 5})}, 0), DimensionError);
}

TEST(Backward, SumOfProductGivesInput) {
  Tensor w = Tensor::vector({0.3, -0.7, 2.0}, true);
  Tensor x = Tensor::vector({1.0, 5.0, -2.0});
  sum(mul(w, x)).backward();
  EXPECT_EQ(std::vector<double>(w.grad().begin(), w.grad().end()), vals(x));
}

TEST(Backward, RequiresScalar) {
  Tensor w = Tensor::vector({1.0, 2.0}, true);
  EXPECT_THROW(scale(w, 2.0).backward(), UsageError);
}

// ---- finite-difference gradient checks, one per operator ------------------

TEST(Gradients, Conv1dDense) {
  std::mt19937_64 rng(10);
  Tensor x = oracle::random_tensor({3, 9}, rng, -1, 1, true);
  Tensor w = oracle::random_tensor({4, 3, 3}, rng, -1, 1, true);
  Tensor b = oracle::random_tensor({4}, rng, -1, 1, true);
  Tensor r = oracle::random_tensor({4, 9}, rng);
  auto res = oracle::fd_check([&] { return sum(mul(conv1d_causal(x, w, b, 2), r)); },
                              {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_LT(res.max_rel_error, kFdTol) << res.worst;
}

TEST(Gradients, Conv1dDepthwise) {
  std::mt19937_64 rng(11);
  Tensor x = oracle::random_tensor({4, 12}, rng, -1, 1, true);
  Tensor w = oracle::random_tensor({4, 1, 3}, rng, -1, 1, true);
  Tensor b = oracle::random_tensor({4}, rng, -1, 1, true);
  Tensor r = oracle::random_tensor({4, 12}, rng);
  auto res = oracle::fd_check([&] { return sum(mul(conv1d_causal(x, w, b, 4, 4), r)); },
                              {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_LT(res.max_rel_error, kFdTol) << res.worst;
}

TEST(Gradients, FullyConnected) {
  std::mt19937_64 rng(12);
  Tensor x = oracle::random_tensor({3, 5}, rng, -1, 1, true);
  Tensor w = oracle::random_tensor({4, 5}, rng, -1, 1, true);
  Tensor b = oracle::random_tensor({4}, rng, -1, 1, true);
  Tensor r = oracle::random_tensor({3, 4}, rng);
  auto res = oracle::fd_check([&] { return sum(mul(fully_connected(x, w, b), r)); },
                              {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_LT(res.max_rel_error, kFdTol) << res.worst;
}

TEST(Gradients, Activations) {
  std::mt19937_64 rng(13);
  Tensor x = oracle::random_off_kink({2, 6}, rng, true);
  Tensor a = Tensor::vector({0.25}, true);
  Tensor r = oracle::random_tensor({2, 6}, rng);
  for (auto kind : {ActivationKind::relu, ActivationKind::prelu, ActivationKind::leaky_relu,
                    ActivationKind::sigmoid}) {
    auto res = oracle::fd_check([&] { return sum(mul(activation(x, kind, a), r)); },
                                {{"x", x}, {"slope", a}});
    EXPECT_LT(res.max_rel_error, kFdTol) << static_cast<int>(kind) << " " << res.worst;
  }
}

TEST(Gradients, Cgln) {
  std::mt19937_64 rng(14);
  Tensor x = oracle::random_tensor({3, 7}, rng, -2, 2, true);
  Tensor g = oracle::random_tensor({3}, rng, 0.5, 1.5, true);
  Tensor b = oracle::random_tensor({3}, rng, -1, 1, true);
  Tensor r = oracle::random_tensor({3, 7}, rng);
  auto res = oracle::fd_check([&] { return sum(mul(cgln(x, g, b), r)); },
                              {{"x", x}, {"gain", g}, {"bias", b}});
  EXPECT_LT(res.max_rel_error, kFdTol) << res.worst;
}

TEST(Gradients, MaxpoolAndMean) {
  std::mt19937_64 rng(15);
  Tensor x = oracle::random_tensor({3, 8}, rng, -1, 1, true);
  Tensor r = oracle::random_tensor({3}, rng);
  auto res = oracle::fd_check([&] { return sum(mul(mean_last_axis(maxpool1d(x, 2)), r)); }, {{"x", x}});
  EXPECT_LT(res.max_rel_error, kFdTol) << res.worst;
}

TEST(Gradients, ElementwiseConcatScale) {
  std::mt19937_64 rng(16);
  Tensor a = oracle::random_tensor({2, 5}, rng, -1, 1, true);
  Tensor b = oracle::random_tensor({2, 5}, rng, -1, 1, true);
  Tensor c = oracle::random_tensor({2}, rng, -1, 1, true);
  Tensor r = oracle::random_tensor({4, 5}, rng);
  auto f = [&] {
    Tensor m = mul(add(a, b), c);
    Tensor s = sub(scale(a, 3.0), b);
    return sum(mul(concat({m, s}, 0), r));
  };
  auto res = oracle::fd_check(f, {{"a", a}, {"b", b}, {"c", c}});
  EXPECT_LT(res.max_rel_error, kFdTol) << res.worst;
}
