#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "catse/objectives.hpp"
#include "catse/runtime.hpp"
#include "catse/trainer.hpp"

using namespace catse;

namespace {

constexpr std::size_t kFrames = 1499;  // 6 s clip

Tensor random_tensor(const Shape& shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(shape, std::move(v), grad);
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 0.1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

ModelConfig config(std::size_t hidden, Variant v = Variant::pctcn) {
  ModelConfig c;
  c.variant = v;
  c.n_classes = 8;
  c.hidden = hidden;
  return c;
}

}  // namespace

static void BM_Conv1x1(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0)), cout = static_cast<std::size_t>(state.range(1));
  Tensor x = random_tensor({cin, kFrames}, 1), w = random_tensor({cout, cin, 1}, 2), b = random_tensor({cout}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d_causal(x, w, b));
}
BENCHMARK(BM_Conv1x1)->Args({128, 32})->Args({32, 128})->Args({258, 128})->Args({128, 256})->Unit(benchmark::kMillisecond);

static void BM_Depthwise(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  Tensor x = random_tensor({h, kFrames}, 1), w = random_tensor({h, 1, 3}, 2), b = random_tensor({h}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d_causal(x, w, b, 8, h));
}
BENCHMARK(BM_Depthwise)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_Cgln(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Tensor x = random_tensor({c, kFrames}, 1), g = random_tensor({c}, 2), b = random_tensor({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(cgln(x, g, b));
}
BENCHMARK(BM_Cgln)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_Forward(benchmark::State& state) {
  const Model m = Model::initialize(config(static_cast<std::size_t>(state.range(0))), 1);
  const auto x = noise(96000, 4);
  for (auto _ : state) benchmark::DoNotOptimize(m.extract(x, multi_hot(8, {1}), std::nullopt));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
  const Model m = Model::initialize(config(static_cast<std::size_t>(state.range(0))), 1);
  const auto x = noise(96000, 4), ref = noise(96000, 5);
  for (auto _ : state) {
    auto ext = m.extract(x, multi_hot(8, {1}), std::nullopt);
    loss_separation(ext.estimate, std::span<const double>(ref).first(ext.estimate.numel())).backward();
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_StreamPush(benchmark::State& state) {
  auto m = std::make_shared<const Model>(Model::initialize(config(static_cast<std::size_t>(state.range(0))), 1));
  Stream s(m, multi_hot(8, {1}));
  const auto x = noise(64, 6);
  for (auto _ : state) benchmark::DoNotOptimize(s.push(x));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_StreamPush)->Arg(32)->Arg(256);
BENCHMARK_MAIN();
