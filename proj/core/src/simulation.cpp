#include "tvpmai/simulation.hpp"

#include <cmath>
#include <random>
#include <string>

#include "tvpmai/csv.hpp"
#include "tvpmai/error.hpp"
#include "tvpmai/mai.hpp"

namespace tvpmai {

namespace {

Eigen::MatrixXd random_gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

Eigen::VectorXd draw_mvn(std::mt19937_64& rng, const Eigen::MatrixXd& chol_lower) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(chol_lower.rows());
  for (int i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return chol_lower * z;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& H) {
  Eigen::LLT<Eigen::MatrixXd> llt((H + H.transpose()) * 0.5);
  if (llt.info() != Eigen::Success)
    throw NumericalError("volatility matrix is not positive definite");
  return llt.matrixL();
}

// Stacks lag blocks into the equation-major state layout used everywhere.
Eigen::VectorXd stack_state(const std::vector<Eigen::MatrixXd>& B, int N, int q,
                            int p) {
  Eigen::VectorXd beta(N * q * p);
  for (int i = 0; i < N; ++i)
    for (int h = 1; h <= p; ++h)
      for (int j = 0; j < q; ++j)
        beta[i * q * p + (h - 1) * q + j] = B[h - 1](i, j);
  return beta;
}

}  // namespace

double index_var_spectral_radius(const Eigen::MatrixXd& omega,
                                 const std::vector<Eigen::MatrixXd>& B) {
  const int q = static_cast<int>(omega.cols());
  const int p = static_cast<int>(B.size());
  // alpha_h = omega' B_h, the VAR(p) the indexes follow.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(q * p, q * p);
  for (int h = 0; h < p; ++h)
    companion.block(0, h * q, q, q) = omega.transpose() * B[h];
  if (p > 1) companion.block(q, 0, q * (p - 1), q * (p - 1)).setIdentity();
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

void DgpSpec::validate() const {
  if (n_series < 1 || q < 1 || q > n_series)
    throw ValidationError("need 1 <= q <= N");
  if (p < 1) throw ValidationError("p must be >= 1");
  if (T < p + 1) throw ValidationError("T too small");
  if (burn_in < 0) throw ValidationError("burn_in must be nonnegative");
  if (!(spectral_guard > 0.0 && spectral_guard < 1.0))
    throw ValidationError("spectral_guard must lie in (0, 1)");
  if (!(target_radius > 0.0 && target_radius < spectral_guard))
    throw ValidationError("target_radius must lie in (0, spectral_guard)");
  if (sigma_beta < 0.0) throw ValidationError("sigma_beta must be nonnegative");
  if (!(h_ewma_kappa > 0.0 && h_ewma_kappa <= 1.0))
    throw ValidationError("h_ewma_kappa must lie in (0, 1]");
  if (variance_break_at >= 0 && !(variance_break_scale > 0.0))
    throw ValidationError("variance_break_scale must be positive");
  if (omega_true.size() &&
      (omega_true.rows() != n_series || omega_true.cols() != q))
    throw ValidationError("omega_true must be N x q");
  if (!beta0.empty() && static_cast<int>(beta0.size()) != p)
    throw ValidationError("beta0 must supply one block per lag");
  if (H0.size() && (H0.rows() != n_series || H0.cols() != n_series))
    throw ValidationError("H0 must be N x N");
}

SimulatedPanel simulate_mai(const DgpSpec& spec) {
  spec.validate();
  const int N = spec.n_series;
  const int q = spec.q;
  const int p = spec.p;

  std::mt19937_64 rng(spec.seed);

  Eigen::MatrixXd omega = spec.omega_true;
  if (!omega.size())
    omega = orthonormalize_columns(random_gaussian(rng, N, q));

  std::vector<Eigen::MatrixXd> B = spec.beta0;
  if (B.empty()) {
    B.resize(p);
    for (int h = 0; h < p; ++h)
      B[h] = random_gaussian(rng, N, q) / std::sqrt(double(N));
    const double rho = index_var_spectral_radius(omega, B);
    if (rho > 0.0)
      for (auto& Bh : B) Bh *= spec.target_radius / rho;
  }
  {
    const double rho = index_var_spectral_radius(omega, B);
    if (rho >= spec.spectral_guard)
      throw ValidationError(
          "index dynamics violate the stationarity guard: spectral radius " +
          csv::format_sig(rho) + " >= " + csv::format_sig(spec.spectral_guard));
  }

  Eigen::MatrixXd H = spec.H0.size()
                          ? spec.H0
                          : Eigen::MatrixXd::Identity(N, N).eval();
  Eigen::MatrixXd base_H = H;
  Eigen::MatrixXd chol = cholesky_lower(H);
  bool chol_stale = false;

  const int total = spec.burn_in + spec.T;
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(total + p);
  for (int r = 0; r < p; ++r) ys.push_back(Eigen::VectorXd::Zero(N));

  SimulatedPanel out;
  out.truth.omega = omega;
  out.truth.beta_path.reserve(spec.T);
  out.truth.H_path.reserve(spec.T);

  std::normal_distribution<double> normal(0.0, 1.0);
  for (int step = 0; step < total; ++step) {
    const int kept_t = step - spec.burn_in;  // >= 0 once past burn-in

    // Random-walk coefficient step, re-drawn while the guard trips.
    if (spec.sigma_beta > 0.0) {
      std::vector<Eigen::MatrixXd> candidate(p);
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        for (int h = 0; h < p; ++h)
          candidate[h] = B[h] + spec.sigma_beta * random_gaussian(rng, N, q);
        ok = index_var_spectral_radius(omega, candidate) < spec.spectral_guard;
      }
      if (ok) B = candidate;  // otherwise keep the previous coefficients
    }

    // Volatility path.
    if (spec.variance_break_at >= 0) {
      const Eigen::MatrixXd target =
          (kept_t >= spec.variance_break_at ? spec.variance_break_scale : 1.0) *
          base_H;
      if ((target - H).norm() > 0.0) {
        H = target;
        chol_stale = true;
      }
    }
    if (spec.h_ewma_kappa < 1.0) {
      const Eigen::VectorXd z = draw_mvn(rng, chol);
      H = spec.h_ewma_kappa * H + (1.0 - spec.h_ewma_kappa) * z * z.transpose();
      H = ((H + H.transpose()) * 0.5).eval();
      chol_stale = true;
    }
    if (chol_stale) {
      chol = cholesky_lower(H);
      chol_stale = false;
    }

    Eigen::VectorXd y = draw_mvn(rng, chol);
    for (int h = 1; h <= p; ++h) {
      const Eigen::VectorXd f = omega.transpose() * ys[ys.size() - h];
      y += B[h - 1] * f;
    }
    ys.push_back(std::move(y));

    if (kept_t >= 0) {
      out.truth.beta_path.push_back(stack_state(B, N, q, p));
      out.truth.H_path.push_back(H);
    }
  }

  out.panel.values.resize(spec.T, N);
  for (int t = 0; t < spec.T; ++t)
    out.panel.values.row(t) = ys[p + spec.burn_in + t].transpose();
  out.panel.series_ids.reserve(N);
  for (int i = 0; i < N; ++i)
    out.panel.series_ids.push_back("S" + std::to_string(i + 1));
  out.panel.tcodes.assign(N, 1);
  out.panel.dates.reserve(spec.T);
  const QuarterDate start{1960, 1};
  for (int t = 0; t < spec.T; ++t)
    out.panel.dates.push_back(QuarterDate::from_serial(start.serial() + t));
  validate_panel(out.panel);
  return out;
}

}  // namespace tvpmai
