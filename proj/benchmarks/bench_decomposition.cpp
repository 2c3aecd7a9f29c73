#include <benchmark/benchmark.h>

#include <random>

#include "tvpmai/decomposition.hpp"

namespace {

using namespace tvpmai;

void BM_VarianceDecompose(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int q = static_cast<int>(state.range(1));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd A(N, N), omega(N, q);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) A(i, j) = normal(rng);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < q; ++j) omega(i, j) = normal(rng);
  const Eigen::MatrixXd H =
      A * A.transpose() + N * Eigen::MatrixXd::Identity(N, N);

  for (auto _ : state) {
    const VolShares v = variance_decompose(H, omega);
    benchmark::DoNotOptimize(v.share_common);
  }
}

}  // namespace

BENCHMARK(BM_VarianceDecompose)->Args({10, 2})->Args({50, 5})->Args({215, 5});
