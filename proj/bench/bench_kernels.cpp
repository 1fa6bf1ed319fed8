// Parallel kernels against their serial references on layer-sized shapes:
// frames x spliced input times spliced input x encoder width.
#include <benchmark/benchmark.h>

#include <random>

#include "emo/kernels.hpp"

namespace {

emo::Matrix random_matrix(std::size_t r, std::size_t c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  emo::Matrix m(r, c);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 5 * 256, 1);
  const auto b = random_matrix(5 * 256, 256, 2);
  for (auto _ : state) benchmark::DoNotOptimize(emo::kernels::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * 5 * 256 * 256));
}

void BM_MatmulReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 5 * 256, 1);
  const auto b = random_matrix(5 * 256, 256, 2);
  for (auto _ : state) benchmark::DoNotOptimize(emo::kernels::reference::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * 5 * 256 * 256));
}

void BM_AddMatmulTn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 5 * 256, 3);
  const auto b = random_matrix(n, 256, 4);
  emo::Matrix c(5 * 256, 256);
  for (auto _ : state) {
    emo::kernels::add_matmul_tn(c, a, b);
    benchmark::ClobberMemory();
  }
}

void BM_AddMatmulTnReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 5 * 256, 3);
  const auto b = random_matrix(n, 256, 4);
  emo::Matrix c(5 * 256, 256);
  for (auto _ : state) {
    emo::kernels::reference::add_matmul_tn(c, a, b);
    benchmark::ClobberMemory();
  }
}

void BM_MatmulNt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 256, 5);
  const auto b = random_matrix(5 * 256, 256, 6);
  for (auto _ : state) benchmark::DoNotOptimize(emo::kernels::matmul_nt(a, b));
}

void BM_MatmulNtReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 256, 5);
  const auto b = random_matrix(5 * 256, 256, 6);
  for (auto _ : state) benchmark::DoNotOptimize(emo::kernels::reference::matmul_nt(a, b));
}

}  // namespace

BENCHMARK(BM_Matmul)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatmulReference)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AddMatmulTn)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AddMatmulTnReference)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatmulNt)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatmulNtReference)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
