// Serial reference GEMM versus the OpenMP kernel at the shapes the classifier
// actually runs: a 256-row minibatch through each dense layer.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rdosr/kernels.hpp"

namespace {

using Gemm = void (*)(std::span<const double>, std::span<const double>, std::span<double>,
                      std::size_t, std::size_t, std::size_t);

template <Gemm kernel>
void run_gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> a(m * k), b(k * n), c(m * n);
  for (double& x : a) x = d(rng);
  for (double& x : b) x = d(rng);
  for (auto _ : state) {
    kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.counters["FLOP/s"] = benchmark::Counter(
      2.0 * static_cast<double>(m * k * n), benchmark::Counter::kIsIterationInvariantRate,
      benchmark::Counter::kIs1000);
}

void layer_shapes(benchmark::internal::Benchmark* b) {
  b->Args({256, 64, 512})->Args({256, 512, 1024})->Args({256, 1024, 512})->Args({4096, 512, 1024});
}

}  // namespace

BENCHMARK(run_gemm<rdosr::kernels::serial::gemm_nn>)->Name("serial/gemm_nn")->Apply(layer_shapes);
BENCHMARK(run_gemm<rdosr::kernels::parallel::gemm_nn>)->Name("parallel/gemm_nn")->Apply(layer_shapes);
BENCHMARK(run_gemm<rdosr::kernels::serial::gemm_tn>)->Name("serial/gemm_tn")->Apply(layer_shapes);
BENCHMARK(run_gemm<rdosr::kernels::parallel::gemm_tn>)->Name("parallel/gemm_tn")->Apply(layer_shapes);
BENCHMARK(run_gemm<rdosr::kernels::serial::gemm_nt>)->Name("serial/gemm_nt")->Apply(layer_shapes);
BENCHMARK(run_gemm<rdosr::kernels::parallel::gemm_nt>)->Name("parallel/gemm_nt")->Apply(layer_shapes);

BENCHMARK_MAIN();
