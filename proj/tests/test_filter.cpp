#include <cmath>
#include <random>

#include "doctest.h"
#include "tvpmai/error.hpp"
#include "tvpmai/filter.hpp"

using namespace tvpmai;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n) {
  const Eigen::MatrixXd a = random_matrix(rng, n, n);
  return a * a.transpose() + 0.5 * n * Eigen::MatrixXd::Identity(n, n);
}

KalmanBelief make_belief(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  KalmanBelief b;
  b.beta_mean = mean;
  b.beta_cov = cov;
  return b;
}

// Exact conjugate posterior after observations y_1..y_t with fixed noise
// covariance H and prior N(mean0, cov0): the oracle for the lambda = kappa
// = 1 reduction. Direct dense inverses on purpose.
struct BatchPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

BatchPosterior batch_regression_posterior(
    const Eigen::VectorXd& mean0, const Eigen::MatrixXd& cov0,
    const Eigen::MatrixXd& H, const std::vector<Eigen::VectorXd>& ys,
    const std::vector<Eigen::MatrixXd>& Zs, int upto) {
  const Eigen::MatrixXd Hinv = H.inverse();
  Eigen::MatrixXd prec = cov0.inverse();
  Eigen::VectorXd lin = cov0.inverse() * mean0;
  for (int i = 0; i <= upto; ++i) {
    prec += Zs[i].transpose() * Hinv * Zs[i];
    lin += Zs[i].transpose() * Hinv * ys[i];
  }
  BatchPosterior out;
  out.cov = prec.inverse();
  out.mean = out.cov * lin;
  return out;
}

}  // namespace

TEST_SUITE("filter") {

TEST_CASE("prediction scales the covariance by the forgetting factor") {
  const auto b = make_belief(Eigen::VectorXd::Zero(2),
                             Eigen::MatrixXd::Identity(2, 2));
  SUBCASE("lambda 1 keeps the constant-parameter covariance") {
    const StatePrediction p = predict_state(b, 1.0);
    CHECK((p.cov - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
  }
  SUBCASE("lambda below one inflates") {
    const StatePrediction p = predict_state(b, 0.99);
    CHECK(p.cov(0, 0) == doctest::Approx(1.0 / 0.99).epsilon(1e-14));
    CHECK(p.cov(1, 0) == 0.0);
  }
  SUBCASE("an observation twenty quarters back keeps about 82% weight") {
    CHECK(std::pow(0.99, 20) == doctest::Approx(0.8179069375972307).epsilon(1e-12));
  }
}

TEST_CASE("uninformative measurement leaves the prior untouched") {
  StatePrediction pred;
  pred.mean = Eigen::VectorXd::Constant(3, 0.5);
  pred.cov = 2.0 * Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd y(2);
  y << 1.0, -2.0;
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 3);
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);

  const KalmanBelief post = update_state(pred, y, Z, H);
  CHECK((post.beta_mean - pred.mean).norm() < 1e-14);
  CHECK((post.beta_cov - pred.cov).norm() < 1e-12);
  CHECK((post.resid - y).norm() == 0.0);
}

TEST_CASE("scalar conjugate update halves the prior") {
  StatePrediction pred;
  pred.mean = Eigen::VectorXd::Zero(1);
  pred.cov = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd y(1);
  y << 0.8;
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(1, 1);
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);

  const KalmanBelief post = update_state(pred, y, Z, H);
  CHECK(post.beta_mean[0] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(post.beta_cov(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("update matches joint-Gaussian conditioning on random instances") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int s = 2, n = 2;
    StatePrediction pred;
    pred.mean = random_matrix(rng, s, 1);
    pred.cov = random_spd(rng, s);
    const Eigen::MatrixXd Z = random_matrix(rng, n, s);
    const Eigen::MatrixXd H = random_spd(rng, n);
    const Eigen::VectorXd y = random_matrix(rng, n, 1);

    // Condition the stacked Gaussian (beta, y) directly.
    const Eigen::MatrixXd S = Z * pred.cov * Z.transpose() + H;
    const Eigen::MatrixXd cross = pred.cov * Z.transpose();
    const Eigen::VectorXd mean_o =
        pred.mean + cross * S.inverse() * (y - Z * pred.mean);
    const Eigen::MatrixXd cov_o =
        pred.cov - cross * S.inverse() * cross.transpose();

    const KalmanBelief post = update_state(pred, y, Z, H);
    CHECK((post.beta_mean - mean_o).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.beta_cov - cov_o).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("predictive density closed forms") {
  SUBCASE("standard normal at zero") {
    StatePrediction pred;
    pred.mean = Eigen::VectorXd::Zero(1);
    pred.cov = Eigen::MatrixXd::Zero(1, 1);
    const PredictiveMoments pm = predictive_density(
        pred, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1),
        Eigen::MatrixXd::Identity(1, 1));
    CHECK(pm.logpdf == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  }
  SUBCASE("diagonal covariance factorizes") {
    std::mt19937_64 rng(11);
    const int n = 4;
    StatePrediction pred;
    pred.mean = random_matrix(rng, n, 1);
    pred.cov = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) H(i, i) = 0.5 + i;
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd y = random_matrix(rng, n, 1);

    const PredictiveMoments pm = predictive_density(pred, y, Z, H);
    double expect = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = y[i] - pred.mean[i];
      expect += -0.5 * (std::log(2.0 * M_PI * H(i, i)) + z * z / H(i, i));
    }
    CHECK(pm.logpdf == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("matches the naive determinant and inverse formula") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 3, s = 4;
      StatePrediction pred;
      pred.mean = random_matrix(rng, s, 1);
      pred.cov = random_spd(rng, s);
      const Eigen::MatrixXd Z = random_matrix(rng, n, s);
      const Eigen::MatrixXd H = random_spd(rng, n);
      const Eigen::VectorXd y = random_matrix(rng, n, 1);

      const Eigen::MatrixXd S = Z * pred.cov * Z.transpose() + H;
      const Eigen::VectorXd r = y - Z * pred.mean;
      const double naive = -0.5 * (n * std::log(2.0 * M_PI) +
                                   std::log(S.determinant()) +
                                   r.dot(S.inverse() * r));
      const PredictiveMoments pm = predictive_density(pred, y, Z, H);
      CHECK(pm.logpdf == doctest::Approx(naive).epsilon(1e-8));
    }
  }
}

TEST_CASE("ewma update") {
  SUBCASE("kappa 1 is the homoskedastic case") {
    Eigen::MatrixXd H(2, 2);
    H << 2, 0.3, 0.3, 1;
    Eigen::VectorXd r(2);
    r << 5, -1;
    CHECK((ewma_update(H, r, 1.0) - H).norm() == 0.0);
  }
  SUBCASE("zero residual shrinks by kappa") {
    const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd out = ewma_update(H, Eigen::VectorXd::Zero(2), 0.94);
    CHECK((out - 0.94 * H).norm() < 1e-15);
  }
  SUBCASE("scalar convex combination") {
    Eigen::MatrixXd H(1, 1);
    H << 1;
    Eigen::VectorXd r(1);
    r << 2;
    CHECK(ewma_update(H, r, 0.5)(0, 0) == doctest::Approx(2.5).epsilon(1e-15));
  }
  SUBCASE("trace stays below the larger of the two inputs") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::MatrixXd H = random_spd(rng, 3);
      const Eigen::VectorXd r = random_matrix(rng, 3, 1);
      const double kappa = 0.5 + 0.5 * (rep % 10) / 10.0;
      const Eigen::MatrixXd out = ewma_update(H, r, std::min(kappa, 1.0));
      CHECK(out.trace() <=
            std::max(H.trace(), r.squaredNorm()) + 1e-12);
    }
  }
}

TEST_CASE("constant-parameter pass reproduces the batch conjugate posterior") {
  std::mt19937_64 rng(23);
  const int n = 2, s = 3, T = 12;
  std::vector<Eigen::VectorXd> ys;
  std::vector<Eigen::MatrixXd> Zs;
  Eigen::MatrixXd Y(T, n);
  for (int t = 0; t < T; ++t) {
    Zs.push_back(random_matrix(rng, n, s));
    ys.push_back(random_matrix(rng, n, 1));
    Y.row(t) = ys.back().transpose();
  }
  FilterConfig fc;
  fc.lambda = 1.0;
  fc.kappa = 1.0;
  fc.beta0_var_scale = 4.0;

  const FilterResult res = filter_pass(Y, Zs, fc);
  const Eigen::MatrixXd cov0 = 4.0 * Eigen::MatrixXd::Identity(s, s);
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  for (int t = 0; t < T; ++t) {
    const BatchPosterior oracle = batch_regression_posterior(
        Eigen::VectorXd::Zero(s), cov0, H, ys, Zs, t);
    CHECK((res.beliefs[t].beta_mean - oracle.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((res.beliefs[t].beta_cov - oracle.cov).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::isfinite(res.beliefs[t].log_pred_density));
  }
}

TEST_CASE("empty sample is rejected") {
  FilterConfig fc;
  CHECK_THROWS_WITH_AS(filter_pass(Eigen::MatrixXd(0, 2), {}, fc),
                       doctest::Contains("insufficient observations"),
                       ValidationError);
}

TEST_CASE("series permutation commutes with filtering") {
  std::mt19937_64 rng(29);
  const int n = 3, q = 1, p = 1, T = 15;
  const int s = n * q * p;
  Eigen::MatrixXd Y = random_matrix(rng, T, n);
  Eigen::MatrixXd f = random_matrix(rng, T, q);

  auto build_Z = [&](const Eigen::MatrixXd& obs) {
    std::vector<Eigen::MatrixXd> Z;
    for (int t = 0; t < T; ++t) {
      Eigen::MatrixXd Zt = Eigen::MatrixXd::Zero(n, s);
      for (int i = 0; i < n; ++i) Zt(i, i * q) = f(t, 0);
      Z.push_back(Zt);
    }
    return Z;
  };

  const std::vector<int> perm = {2, 0, 1};
  Eigen::MatrixXd Yp(T, n);
  for (int i = 0; i < n; ++i) Yp.col(i) = Y.col(perm[i]);

  FilterConfig fc;
  fc.lambda = 0.98;
  fc.kappa = 0.95;
  const FilterResult a = filter_pass(Y, build_Z(Y), fc);
  const FilterResult b = filter_pass(Yp, build_Z(Yp), fc);

  for (int t = 0; t < T; ++t) {
    CHECK(a.beliefs[t].log_pred_density ==
          doctest::Approx(b.beliefs[t].log_pred_density).epsilon(1e-10));
    for (int i = 0; i < n; ++i) {
      CHECK(b.beliefs[t].beta_mean[i * q] ==
            doctest::Approx(a.beliefs[t].beta_mean[perm[i] * q]).epsilon(1e-10));
      CHECK(b.beliefs[t].resid[i] ==
            doctest::Approx(a.beliefs[t].resid[perm[i]]).epsilon(1e-10));
    }
  }
}

TEST_CASE("belief matrices stay symmetric and positive semidefinite") {
  std::mt19937_64 rng(37);
  const int n = 3, s = 4, T = 25;
  Eigen::MatrixXd Y(T, n);
  std::vector<Eigen::MatrixXd> Zs;
  for (int t = 0; t < T; ++t) {
    Zs.push_back(random_matrix(rng, n, s));
    Y.row(t) = random_matrix(rng, 1, n);
  }
  FilterConfig fc;
  fc.lambda = 0.97;
  fc.kappa = 0.95;
  const FilterResult res = filter_pass(Y, Zs, fc);
  for (const auto& b : res.beliefs) {
    CHECK((b.beta_cov - b.beta_cov.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((b.H - b.H.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b.beta_cov)
              .eigenvalues()
              .minCoeff() >= -1e-8);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b.H)
              .eigenvalues()
              .minCoeff() >= -1e-8);
    CHECK(std::isfinite(b.log_pred_density));
  }
}

TEST_CASE("information accumulates monotonically in the constant case") {
  std::mt19937_64 rng(31);
  const int n = 2, s = 3, T = 20;
  Eigen::MatrixXd Y(T, n);
  std::vector<Eigen::MatrixXd> Zs;
  for (int t = 0; t < T; ++t) {
    Zs.push_back(random_matrix(rng, n, s));
    Y.row(t) = random_matrix(rng, n, 1).transpose();
  }
  FilterConfig fc;
  fc.lambda = 1.0;
  fc.kappa = 1.0;
  const FilterResult res = filter_pass(Y, Zs, fc);
  for (int t = 1; t < T; ++t) {
    for (int i = 0; i < s; ++i) {
      CHECK(res.beliefs[t].beta_cov(i, i) <=
            res.beliefs[t - 1].beta_cov(i, i) + 1e-12);
    }
  }
}

}  // TEST_SUITE
