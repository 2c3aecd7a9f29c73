#include <benchmark/benchmark.h>

#include "tvpmai/filter.hpp"
#include "tvpmai/mai.hpp"
#include "tvpmai/simulation.hpp"

namespace {

using namespace tvpmai;

// One full forgetting-factor pass at a given panel size.
void BM_FilterPass(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int q = static_cast<int>(state.range(1));
  const int p = static_cast<int>(state.range(2));
  const int T = 200;

  DgpSpec spec;
  spec.n_series = N;
  spec.q = q;
  spec.p = p;
  spec.T = T;
  spec.seed = 1;
  const SimulatedPanel sim = simulate_mai(spec);
  const Eigen::MatrixXd omega = init_omega_pca(sim.panel.values, q).omega;
  const Eigen::MatrixXd F = build_indexes(sim.panel.values, omega);
  const auto Z = build_regressors(F, p, N);

  FilterConfig fc;
  fc.lambda = 0.99;
  fc.kappa = 0.96;
  for (auto _ : state) {
    const FilterResult res =
        filter_pass(sim.panel.values.bottomRows(T - p), Z, fc);
    benchmark::DoNotOptimize(res.total_log_pl);
  }
}

void BM_SwitchingEstimate(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  DgpSpec spec;
  spec.n_series = N;
  spec.q = 2;
  spec.p = 1;
  spec.T = 300;
  spec.seed = 2;
  const SimulatedPanel sim = simulate_mai(spec);

  ModelSpec ms;
  ms.q = 2;
  ms.p = 1;
  ms.lambda = 0.99;
  ms.kappa = 0.96;
  for (auto _ : state) {
    const MaiFit fit = switching_estimate(sim.panel.values, ms);
    benchmark::DoNotOptimize(fit.log_pl);
  }
}

}  // namespace

BENCHMARK(BM_FilterPass)->Args({5, 1, 1})->Args({10, 2, 2})->Args({25, 3, 4});
BENCHMARK(BM_SwitchingEstimate)->Arg(6)->Arg(12);
