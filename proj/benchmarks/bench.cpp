#include <benchmark/benchmark.h>

#include "booster/attacks/attacks.hpp"
#include "booster/autodiff/ops.hpp"
#include "booster/injection/signal.hpp"
#include "booster/model/model.hpp"
#include "booster/random.hpp"
#include "booster/training/training.hpp"

namespace {

using namespace booster;

Tensor images(std::size_t n, std::size_t side, std::uint64_t seed = 1) {
  Rng rng(seed);
  return uniform_tensor(Shape{n, 1, side, side}, 0.0f, 1.0f, rng);
}

std::vector<int> labels(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 10);
  return y;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = uniform_tensor(Shape{n, 8, 17, 17}, 0.0f, 1.0f, rng);
  const Tensor k = normal_tensor(Shape{16, 8, 3, 3}, rng);
  const Tensor b(Shape{16}, 0.0f);
  for (auto _ : state) {
    ad::Graph g;
    ad::Var out = ad::sum(ad::conv2d(g.borrow(x, true), g.borrow(k, true), g.borrow(b, true)));
    g.backward(out);
    benchmark::DoNotOptimize(g.grad(out));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(64);

void BM_Predict(benchmark::State& state) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 0);
  const Tensor x = images(128, 36);
  for (auto _ : state) benchmark::DoNotOptimize(predict(m, x));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Predict);

void BM_InputGradient(benchmark::State& state) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 0);
  const Tensor x = images(128, 36);
  const auto y = labels(128);
  for (auto _ : state) benchmark::DoNotOptimize(input_gradient(m, x, y));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_InputGradient);

void BM_Pgd(benchmark::State& state) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 0);
  const Tensor x = images(64, 36);
  const auto y = labels(64);
  const AttackSpec spec = attack_profile(state.range(0) == 7 ? "pgd7" : "pgd20");
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(pgd(m, x, y, spec, rng));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Pgd)->Arg(7)->Arg(20);

void BM_Inject(benchmark::State& state) {
  Rng rng(4);
  const BoosterSignal s = random_signal(4, 1, 28, 28, rng);
  const Tensor x = images(128, 28);
  for (auto _ : state) benchmark::DoNotOptimize(inject(x, s));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Inject);

void BM_SignalGradient(benchmark::State& state) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 0);
  Rng rng(5);
  const BoosterSignal s = random_signal(4, 1, 28, 28, rng);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = images(n, 28);
  const auto y = labels(n);
  for (auto _ : state) benchmark::DoNotOptimize(signal_gradient(m, x, y, s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SignalGradient)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
