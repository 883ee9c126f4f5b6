// Serial reference kernels against their OpenMP versions and the kd-tree.

#include "ddmna/kernels.hpp"
#include "ddmna/nn_index.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace ddmna;

namespace {

std::vector<Pair> random_pairs(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Pair> out(n);
  for (auto& p : out) {
    const double v = normal(rng);
    p = {v, 1e-3 * v + 1e-4 * normal(rng)};
  }
  return out;
}

constexpr double kWeight = 1e-3;

void BM_scan_serial(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)), 1);
  const Pair q{0.3, 2e-4};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::nearest_scan_serial(pairs, q, kWeight));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_scan_parallel(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)), 1);
  const Pair q{0.3, 2e-4};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::nearest_scan_parallel(pairs, q, kWeight));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_batch_serial(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)), 1);
  const auto queries = random_pairs(1000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::nearest_batch_serial(pairs, queries, kWeight));
  state.SetItemsProcessed(state.iterations() * 1000);
}

void BM_batch_parallel(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)), 1);
  const auto queries = random_pairs(1000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::nearest_batch_parallel(pairs, queries, kWeight));
  state.SetItemsProcessed(state.iterations() * 1000);
}

void BM_batch_indexed(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)), 1);
  const auto queries = random_pairs(1000, 2);
  const NearestIndex index(pairs);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::nearest_batch_indexed(index, queries, kWeight));
  state.SetItemsProcessed(state.iterations() * 1000);
}

// Stand-in for the exhaustive tuple search: a cheap objective over a large index range.
double objective(std::size_t k) {
  const double x = static_cast<double>(k % 9973) * 1e-3 - 4.0;
  return (x - 1.25) * (x - 1.25) + 1e-9 * static_cast<double>(k);
}

void BM_argmin_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::argmin_serial(n, objective));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_argmin_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::argmin_parallel(n, objective));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_scan_serial)->RangeMultiplier(10)->Range(1000, 1000000)->UseRealTime();
BENCHMARK(BM_scan_parallel)->RangeMultiplier(10)->Range(1000, 1000000)->UseRealTime();
BENCHMARK(BM_batch_serial)->RangeMultiplier(10)->Range(1000, 100000)->UseRealTime();
BENCHMARK(BM_batch_parallel)->RangeMultiplier(10)->Range(1000, 100000)->UseRealTime();
BENCHMARK(BM_batch_indexed)->RangeMultiplier(10)->Range(1000, 100000)->UseRealTime();
BENCHMARK(BM_argmin_serial)->RangeMultiplier(10)->Range(10000, 1000000)->UseRealTime();
BENCHMARK(BM_argmin_parallel)->RangeMultiplier(10)->Range(10000, 1000000)->UseRealTime();

BENCHMARK_MAIN();
