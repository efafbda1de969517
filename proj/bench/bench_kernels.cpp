// Serial vs OpenMP timings for the numeric kernels and the IB-Tune gradients.
//
//   bench_kernels --benchmark_filter=dtw

#include <benchmark/benchmark.h>

#include "mfsim/corpus.hpp"
#include "mfsim/ibtune.hpp"
#include "mfsim/kernels.hpp"

using namespace mfsim;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

std::vector<std::vector<double>> random_series(std::size_t count, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(count, std::vector<double>(length));
  for (auto& s : out) {
    for (auto& x : s) x = rng.uniform();
  }
  return out;
}

void BM_DtwBatch(benchmark::State& state) {
  // One series per (dimension, label) pair of a full report: 8 dimensions, 4 to 6 labels.
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto a = random_series(40, n, 1);
  const auto b = random_series(40, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dtw_batch(a, b, exec_of(state)));
  label(state);
}
BENCHMARK(BM_DtwBatch)->ArgsProduct({{0, 1}, {100, 400}})->Unit(benchmark::kMillisecond);

void BM_WindowCounts(benchmark::State& state) {
  Rng rng(3);
  std::vector<int> symbols(static_cast<std::size_t>(state.range(1)));
  for (auto& s : symbols) s = static_cast<int>(rng.below(7)) - 1;
  for (auto _ : state) benchmark::DoNotOptimize(window_counts(symbols, 6, 16, exec_of(state)));
  label(state);
}
BENCHMARK(BM_WindowCounts)->ArgsProduct({{0, 1}, {10000, 200000}})->Unit(benchmark::kMicrosecond);

void BM_WeightedRowSum(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(1));
  const std::size_t cols = 64;
  Rng rng(4);
  std::vector<double> values(rows * cols), weight(rows);
  for (auto& v : values) v = rng.uniform();
  for (auto& w : weight) w = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(weighted_row_sum(values, weight, cols, exec_of(state)));
  label(state);
}
BENCHMARK(BM_WeightedRowSum)->ArgsProduct({{0, 1}, {1000, 50000}})->Unit(benchmark::kMicrosecond);

struct GradFixture {
  ToyModelParams mf, prior, policy;
  IBBatch batch;
};

const GradFixture& grad_fixture() {
  static const GradFixture f = [] {
    const auto syn = generate_synthetic(SyntheticGenConfig::self_exciting(60, 30, 16, 0));
    const auto data = toy_dataset(syn.corpus, 16);
    GradFixture g;
    g.mf = ToyModelParams::random(data.states, data.actions, 8, 1, 0.5);
    g.prior = ToyModelParams::random(data.states, data.actions, 8, 2, 0.5);
    g.policy = ToyModelParams::random(data.states, data.actions, 8, 3, 0.5);
    g.batch = build_ib_batch(data, g.mf);
    return g;
  }();
  return f;
}

void BM_GradMeanField(benchmark::State& state) {
  const auto& f = grad_fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_meanfield_loss(f.mf, f.prior, f.policy, f.batch, 2.0, exec_of(state)));
  }
  label(state);
}
BENCHMARK(BM_GradMeanField)->ArgsProduct({{0, 1}, {0}})->Unit(benchmark::kMicrosecond);

void BM_GradPolicy(benchmark::State& state) {
  const auto& f = grad_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(grad_policy_loss(f.policy, f.mf, f.batch, exec_of(state)));
  label(state);
}
BENCHMARK(BM_GradPolicy)->ArgsProduct({{0, 1}, {0}})->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
