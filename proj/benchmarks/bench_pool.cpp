#include <benchmark/benchmark.h>

#include <random>

#include "tvpmai/pool.hpp"

namespace {

using namespace tvpmai;

// The weight recursion alone, at grid sizes typical for the model pools.
void BM_WeightRecursion(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const int T = 200;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd ll(T, K);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) ll(t, k) = -1.0 + normal(rng);

  for (auto _ : state) {
    Eigen::VectorXd log_pi = Eigen::VectorXd::Constant(K, -std::log(double(K)));
    for (int t = 0; t < T; ++t)
      log_pi = log_pool_update_weights(log_pool_predict_weights(log_pi, 0.99),
                                       ll.row(t).transpose());
    benchmark::DoNotOptimize(log_pi);
  }
}

}  // namespace

BENCHMARK(BM_WeightRecursion)->Arg(8)->Arg(36)->Arg(80);

BENCHMARK_MAIN();
