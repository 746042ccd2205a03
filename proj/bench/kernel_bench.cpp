// Serial reference kernels against the blocked OpenMP kernels at the shapes
// the exec model trains with (batch 128, 1000-wide dense layers).

#include <benchmark/benchmark.h>

#include <vector>

#include "lowrate/common.hpp"
#include "lowrate/nn/kernels.hpp"

namespace {

using namespace lowrate::nn::kernels;

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  lowrate::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = filled(m * k, 1), b = filled(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void bm_matmul_tn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = filled(k * m, 1), b = filled(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void bm_matmul_nt(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = filled(m * k, 1), b = filled(n * k, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Forward, auto Backward>
void bm_batchnorm(benchmark::State& state) {
  const std::size_t m = 128, n = static_cast<std::size_t>(state.range(0));
  const auto x = filled(m * n, 3), dy = filled(m * n, 4), gamma = filled(n, 5), beta = filled(n, 6);
  std::vector<double> y(m * n), xhat(m * n), dx(m * n), mean(n), var(n), inv(n), dg(n), db(n);
  for (auto _ : state) {
    Forward(x, gamma, beta, 1e-5, m, n, y, xhat, mean, var, inv);
    Backward(dy, xhat, gamma, inv, m, n, dx, dg, db);
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * n));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 1000, 1000})->Args({128, 1000, 50})->Args({128, 60, 10})->Unit(benchmark::kMillisecond);
}

BENCHMARK(bm_matmul<reference::matmul>)->Name("matmul/reference")->Apply(shapes);
BENCHMARK(bm_matmul<parallel::matmul>)->Name("matmul/parallel")->Apply(shapes);
BENCHMARK(bm_matmul_tn<reference::matmul_tn>)->Name("matmul_tn/reference")->Apply(shapes);
BENCHMARK(bm_matmul_tn<parallel::matmul_tn>)->Name("matmul_tn/parallel")->Apply(shapes);
BENCHMARK(bm_matmul_nt<reference::matmul_nt>)->Name("matmul_nt/reference")->Apply(shapes);
BENCHMARK(bm_matmul_nt<parallel::matmul_nt>)->Name("matmul_nt/parallel")->Apply(shapes);
BENCHMARK(bm_batchnorm<reference::batchnorm_train, reference::batchnorm_backward>)
    ->Name("batchnorm/reference")
    ->Arg(1000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_batchnorm<parallel::batchnorm_train, parallel::batchnorm_backward>)
    ->Name("batchnorm/parallel")
    ->Arg(1000)
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
