#include <benchmark/benchmark.h>

#include "ftscope/fft.hpp"
#include "ftscope/metrics.hpp"
#include "ftscope/model.hpp"
#include "ftscope/ops.hpp"
#include "ftscope/rng.hpp"

namespace {

using namespace ftscope;

Tensor noise(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = noise({8, c, 16, 16}, 1), w = noise({c, c, 3, 3}, 2), b = noise({c}, 3);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(ops::conv2d(tape.constant(x), tape.constant(w), tape.constant(b), {1, 1}).value());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const Tensor x = noise({8, 32, 16, 16}, 1), w = noise({32, 32, 3, 3}, 2), b = noise({32}, 3);
  for (auto _ : state) {
    Tape tape;
    Var wv = tape.parameter(w);
    Var y = ops::conv2d(tape.constant(x), wv, tape.parameter(b), {1, 1});
    benchmark::DoNotOptimize(tape.backward(ops::sum(y)));
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMicrosecond);

void BM_ModelForward(benchmark::State& state) {
  const auto m = build_model(ModelSpec::desk({HeadKind::softmax, 8}), 1);
  const Tensor batch = noise({static_cast<std::size_t>(state.range(0)), 3, 32, 32}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ModelForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Fft2(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor img = noise({n, n}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(fft2(img));
}
BENCHMARK(BM_Fft2)->Arg(32)->Arg(64)->Arg(224)->Unit(benchmark::kMicrosecond);

void BM_LinearCka(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = noise({n, 64}, 6), y = noise({n, 96}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(linear_cka(x, y));
}
BENCHMARK(BM_LinearCka)->Arg(120)->Arg(800)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
