#include <cmath>
#include <random>

#include "doctest.h"
#include "tvpmai/error.hpp"
#include "tvpmai/pool.hpp"
#include "tvpmai/simulation.hpp"

using namespace tvpmai;

TEST_SUITE("pool") {

TEST_CASE("weight prediction") {
  Eigen::VectorXd pi(2);
  SUBCASE("alpha one is the identity map") {
    pi << 0.7, 0.3;
    const Eigen::VectorXd out = pool_predict_weights(pi, 1.0);
    CHECK(out[0] == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(0.3).epsilon(1e-14));
  }
  SUBCASE("square-root discounting forces the two-to-one ratio") {
    pi << 0.8, 0.2;
    const Eigen::VectorXd out = pool_predict_weights(pi, 0.5);
    CHECK(out[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("vanishing alpha flattens any interior simplex") {
    pi << 0.9, 0.1;
    const Eigen::VectorXd out = pool_predict_weights(pi, 1e-9);
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("an all-zero pool is degenerate") {
    pi << 0.0, 0.0;
    CHECK_THROWS_AS(pool_predict_weights(pi, 0.9), ValidationError);
  }
}

TEST_CASE("weight update") {
  SUBCASE("symmetry gives uniform weights") {
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(4, 0.25);
    Eigen::VectorXd ll = Eigen::VectorXd::Constant(4, -1.3);
    const Eigen::VectorXd out = pool_update_weights(pi, ll);
    for (int k = 0; k < 4; ++k)
      CHECK(out[k] == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("a three-to-one likelihood ratio") {
    Eigen::VectorXd pi(2), ll(2);
    pi << 0.5, 0.5;
    ll << 0.0, -std::log(3.0);
    const Eigen::VectorXd out = pool_update_weights(pi, ll);
    CHECK(out[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("collapse when every model fails") {
    Eigen::VectorXd pi(2), ll(2);
    pi << 0.5, 0.5;
    ll << -std::numeric_limits<double>::infinity(),
        -std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(pool_update_weights(pi, ll),
                         doctest::Contains("pool collapse"), NumericalError);
  }
  SUBCASE("alpha one reproduces the cumulative-product BMA weights") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    const int K = 5, T = 40;
    Eigen::MatrixXd ll(T, K);
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < K; ++k) ll(t, k) = -1.0 + normal(rng);

    Eigen::VectorXd pi = Eigen::VectorXd::Constant(K, 1.0 / K);
    for (int t = 0; t < T; ++t) {
      pi = pool_update_weights(pool_predict_weights(pi, 1.0),
                               ll.row(t).transpose());
      CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Oracle: normalized cumulative sums in log space.
    Eigen::VectorXd cum = ll.colwise().sum();
    const double norm = log_sum_exp(cum);
    for (int k = 0; k < K; ++k)
      CHECK(std::log(pi[k]) == doctest::Approx(cum[k] - norm).epsilon(1e-8));
  }
}

TEST_CASE("simplex preserved over random steps") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  const int K = 6;
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(K, 1.0 / K);
  for (int step = 0; step < 300; ++step) {
    const double alpha = 0.01 + 0.99 * unif(rng);
    Eigen::VectorXd ll(K);
    for (int k = 0; k < K; ++k) ll[k] = -2.0 + 3.0 * normal(rng);
    const Eigen::VectorXd pred = pool_predict_weights(pi, alpha);
    CHECK(pred.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pred.minCoeff() >= 0.0);
    pi = pool_update_weights(pred, ll);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pi.minCoeff() >= 0.0);
  }
}

TEST_CASE("mixture forecast") {
  SUBCASE("single component passes through") {
    Eigen::VectorXd w(1);
    w << 1.0;
    Eigen::VectorXd m(2);
    m << 1.0, -2.0;
    const GaussianMixture g =
        dma_forecast(w, {m}, {Eigen::MatrixXd::Identity(2, 2)});
    CHECK((g.mean() - m).norm() == 0.0);
  }
  SUBCASE("equal weights average the means") {
    Eigen::VectorXd w(2);
    w << 0.5, 0.5;
    Eigen::VectorXd m1(1), m2(1);
    m1 << 0.0;
    m2 << 2.0;
    const GaussianMixture g = dma_forecast(
        w, {m1, m2},
        {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)});
    CHECK(g.mean()[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("log density equals the direct mixture evaluation") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    Eigen::VectorXd w(3);
    w << 0.2, 0.5, 0.3;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd m(2);
      m << normal(rng), normal(rng);
      means.push_back(m);
      Eigen::MatrixXd a(2, 2);
      a << 1.0 + 0.1 * k, 0.2, 0.2, 0.8;
      covs.push_back(a);
    }
    const GaussianMixture g = dma_forecast(w, means, covs);
    Eigen::VectorXd x(2);
    x << 0.3, -0.4;

    double direct = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Eigen::MatrixXd& C = covs[k];
      const double det = C(0, 0) * C(1, 1) - C(0, 1) * C(1, 0);
      const Eigen::VectorXd r = x - means[k];
      const double quad = (r[0] * (C(1, 1) * r[0] - C(0, 1) * r[1]) +
                           r[1] * (C(0, 0) * r[1] - C(1, 0) * r[0])) /
                          det;
      direct += w[k] * std::exp(-0.5 * quad) / (2.0 * M_PI * std::sqrt(det));
    }
    CHECK(g.logpdf(x) == doctest::Approx(std::log(direct)).epsilon(1e-12));
  }
}

TEST_CASE("model selection") {
  Eigen::VectorXd w(3);
  w << 0.2, 0.5, 0.3;
  CHECK(dms_select(w) == 1);
  Eigen::VectorXd tie(2);
  tie << 0.5, 0.5;
  CHECK(dms_select(tie) == 0);
  // Strictly increasing transforms leave the argmax unchanged.
  CHECK(dms_select(w * 17.0) == dms_select(w));
  CHECK(dms_select(w.array().exp().matrix()) == dms_select(w));
  CHECK(dms_select(w.array().sqrt().matrix()) == dms_select(w));
}

TEST_CASE("run_pool keeps identical models at equal weight") {
  DgpSpec dgp;
  dgp.n_series = 4;
  dgp.q = 1;
  dgp.T = 150;
  dgp.seed = 13;
  const SimulatedPanel sim = simulate_mai(dgp);

  ModelSpec spec;
  spec.q = 1;
  spec.lambda = 0.99;
  spec.kappa = 0.96;
  PoolRunOptions opt;
  opt.alpha = 0.95;
  const PoolRunResult res = run_pool(sim.panel.values, {spec, spec}, opt);
  for (const auto& step : res.steps) {
    CHECK(step.pi_post[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(step.pi_post.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("alpha one ranking matches the accumulated log likelihood") {
  DgpSpec dgp;
  dgp.n_series = 5;
  dgp.q = 2;
  dgp.T = 200;
  dgp.seed = 17;
  const SimulatedPanel sim = simulate_mai(dgp);

  std::vector<ModelSpec> specs;
  for (int q = 1; q <= 3; ++q) {
    ModelSpec s;
    s.q = q;
    s.lambda = 0.99;
    s.kappa = 0.96;
    specs.push_back(s);
  }
  PoolRunOptions opt;
  opt.alpha = 1.0;
  const PoolRunResult res = run_pool(sim.panel.values, specs, opt);

  // Terminal posterior must order the models exactly like total log PL.
  const auto& last = res.steps.back();
  for (std::size_t a = 0; a < specs.size(); ++a)
    for (std::size_t b = 0; b < specs.size(); ++b)
      if (res.total_log_pl[a] > res.total_log_pl[b] + 1e-9)
        CHECK(last.pi_post[a] >= last.pi_post[b]);
  // And the recursion reproduces the BMA weights in log space.
  Eigen::VectorXd cum = res.total_log_pl;
  const double norm = log_sum_exp(cum);
  for (int k = 0; k < 3; ++k) {
    if (last.pi_post[k] > 0.0)
      CHECK(std::log(last.pi_post[k]) ==
            doctest::Approx(cum[k] - norm).epsilon(1e-8));
  }
}

TEST_CASE("the data-generating model wins the pool") {
  DgpSpec dgp;
  dgp.n_series = 5;
  dgp.q = 2;
  dgp.T = 300;
  dgp.seed = 19;
  const SimulatedPanel sim = simulate_mai(dgp);

  ModelSpec truth;
  truth.q = 2;
  truth.lambda = 1.0;
  truth.kappa = 1.0;
  ModelSpec wrong = truth;
  wrong.q = 1;

  PoolRunOptions opt;
  opt.alpha = 0.99;
  const PoolRunResult res = run_pool(sim.panel.values, {truth, wrong}, opt);
  bool dominated = false;
  for (std::size_t i = 0; i < res.steps.size() / 2; ++i) {
    if (res.steps[i].pi_post[0] > 0.9) {
      dominated = true;
      break;
    }
  }
  CHECK(dominated);
}

TEST_CASE("worker count does not change pool results") {
  DgpSpec dgp;
  dgp.n_series = 4;
  dgp.q = 2;
  dgp.T = 150;
  dgp.seed = 29;
  const SimulatedPanel sim = simulate_mai(dgp);

  std::vector<ModelSpec> specs(3);
  specs[0].q = 1;
  specs[1].q = 2;
  specs[2].q = 3;
  for (auto& s : specs) {
    s.lambda = 0.99;
    s.kappa = 0.96;
  }
  PoolRunOptions serial;
  serial.workers = 1;
  PoolRunOptions threaded = serial;
  threaded.workers = 4;
  const PoolRunResult a = run_pool(sim.panel.values, specs, serial);
  const PoolRunResult b = run_pool(sim.panel.values, specs, threaded);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i)
    CHECK((a.steps[i].pi_post - b.steps[i].pi_post).norm() == 0.0);
  CHECK((a.total_log_pl - b.total_log_pl).norm() == 0.0);
  CHECK((a.final_state.pi_post - b.final_state.pi_post).norm() == 0.0);
}

TEST_CASE("pool forecasts stay inside the convex hull of the members") {
  DgpSpec dgp;
  dgp.n_series = 4;
  dgp.q = 1;
  dgp.T = 120;
  dgp.seed = 23;
  const SimulatedPanel sim = simulate_mai(dgp);

  std::vector<ModelSpec> specs(2);
  specs[0].q = 1;
  specs[1].q = 2;
  for (auto& s : specs) {
    s.lambda = 0.99;
    s.kappa = 0.96;
  }
  PoolRunOptions opt;
  opt.emit_forecasts = true;
  opt.horizons = {1, 2};
  const PoolRunResult res = run_pool(sim.panel.values, specs, opt);
  REQUIRE(!res.forecasts.empty());
  for (const auto& fc : res.forecasts) {
    const Eigen::VectorXd mean = fc.dist.mean();
    for (int i = 0; i < mean.size(); ++i) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int k = 0; k < fc.dist.components(); ++k) {
        lo = std::min(lo, fc.dist.means[k][i]);
        hi = std::max(hi, fc.dist.means[k][i]);
      }
      CHECK(mean[i] >= lo - 1e-12);
      CHECK(mean[i] <= hi + 1e-12);
    }
  }
}

}  // TEST_SUITE
