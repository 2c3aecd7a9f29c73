#ifndef TVPMAI_MAI_HPP
#define TVPMAI_MAI_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tvpmai/decomposition.hpp"
#include "tvpmai/filter.hpp"
#include "tvpmai/panel.hpp"

namespace tvpmai {

// One candidate model: q indexes, p lags, forgetting factor lambda, EWMA
// decay kappa, optionally a block identification template.
struct ModelSpec {
  int q = 1;
  int p = 1;
  double lambda = 1.0;
  double kappa = 1.0;
  std::optional<GroupTemplate> restriction;

  void validate(int n_series) const;
  std::string fingerprint() const;  // e.g. "q2_p1_l0.99_k0.96"
};

// Index weight matrix omega (N x q). The indexes are f_t = omega' y_t; the
// model is identified only up to an invertible q x q transform unless a
// block restriction pins it down, so cross-run comparisons should use
// column-space angles rather than raw entries.
struct IndexWeights {
  Eigen::MatrixXd omega;  // N x q
  std::optional<GroupTemplate> groups;
  bool normalized = false;

  int n() const { return static_cast<int>(omega.rows()); }
  int q() const { return static_cast<int>(omega.cols()); }
  // Throws unless omega has full column rank (smallest singular value
  // above 1e-10) and, when restricted, matches the template exactly.
  void validate() const;
};

struct MaiFit {
  IndexWeights omega;
  std::vector<KalmanBelief> beliefs;  // aligned with t = p .. T-1
  Eigen::MatrixXd indexes;            // T x q, row t = omega' y_t
  int iterations = 0;
  bool converged = false;
  double log_pl = 0.0;                // sum of one-step log predictive densities
  std::vector<double> log_pl_trace;   // one entry per filter pass
  ModelSpec spec;
};

struct SwitchingOptions {
  double tol = 1e-6;    // relative Frobenius change of omega
  int max_iter = 100;
  double beta0_var_scale = 4.0;
  bool h0_sample_cov = false;  // false: H0 = I; true: sample covariance of y
  double jitter = 1e-8;
  std::optional<Eigen::MatrixXd> omega_init;  // warm start; default PCA
};

// f_t = omega' y_t for every row of Y.
Eigen::MatrixXd build_indexes(const Eigen::MatrixXd& Y,
                              const Eigen::MatrixXd& omega);

// Measurement matrices for the state-space form, one per usable time
// t = p .. T-1 (0-based): Z_t = I_N (x) (f'_{t-1}, ..., f'_{t-p}).
//
// The state vector stacks coefficients equation-major: entry
// [i*q*p + (h-1)*q + j] multiplies f_{j,t-h} in equation i. This ordering is
// fixed; every consumer of the state (regressor construction, the omega
// regression, forecasting) relies on it.
std::vector<Eigen::MatrixXd> build_regressors(const Eigen::MatrixXd& indexes,
                                              int p, int n_series);

// Coefficient matrix on f_{t-h} implied by one state vector: N x q block
// for lag h (1-based).
Eigen::MatrixXd lag_coefficient_block(const Eigen::VectorXd& beta, int n_series,
                                      int q, int p, int h);

// GLS step for the index weights: regress whitened observations on the
// whitened lag structure implied by the filtered coefficient path,
//   vec(H_t^{-1/2} y_t) = sum_h (y'_{t-h} (x) H_t^{-1/2} B_{h,t}) vec(omega') + e,
// optionally restricted through the block template (pinned leaders move to
// the left-hand side). beta_path and H_path align with t = p .. T-1.
IndexWeights omega_ols_step(const Eigen::MatrixXd& Y,
                            const std::vector<Eigen::VectorXd>& beta_path,
                            const std::vector<Eigen::MatrixXd>& H_path, int q,
                            int p,
                            const std::optional<GroupTemplate>& restriction);

// Eigenvectors of the sample covariance for the q largest eigenvalues,
// eigenvalue-descending, each column signed so its largest-magnitude entry
// is positive.
IndexWeights init_omega_pca(const Eigen::MatrixXd& Y, int q);

// Hybrid switching estimation: alternate the forgetting-factor Kalman pass,
// EWMA volatility extraction and the omega regression until the relative
// Frobenius change of omega drops below tol. On non-convergence the best
// iterate by log predictive likelihood is returned with converged = false.
MaiFit switching_estimate(const Eigen::MatrixXd& Y, const ModelSpec& spec,
                          const SwitchingOptions& options = {});
MaiFit switching_estimate(const TimeSeriesPanel& panel, const ModelSpec& spec,
                          const SwitchingOptions& options = {});

// Iterated multi-step forecast from a fitted state. Coefficients are frozen
// at the filtered state (random-walk mean), the volatility at its current
// EWMA estimate. The one-step covariance carries the state uncertainty
// H + Z Sigma_{t+1|t} Z'; further steps propagate innovations through the
// implied index-VAR companion recursion.
struct IteratedForecast {
  std::vector<Eigen::VectorXd> means;  // h = 1 .. h_max
  std::vector<Eigen::MatrixXd> covs;
};

IteratedForecast iterate_forecast(const Eigen::MatrixXd& omega,
                                  const Eigen::VectorXd& beta,
                                  const Eigen::MatrixXd& beta_cov,
                                  const Eigen::MatrixXd& H,
                                  const Eigen::MatrixXd& y_tail, int p,
                                  double lambda, int h_max);

// Convenience overload reading the frozen state off the end of a fit;
// Y must be the sample the fit was produced on.
IteratedForecast iterate_forecast(const MaiFit& fit, const Eigen::MatrixXd& Y,
                                  int h_max);

// Column-orthonormalized copy of omega (reporting only; sign-fixed like the
// PCA initialization).
Eigen::MatrixXd orthonormalize_columns(const Eigen::MatrixXd& omega);

// Largest principal angle (radians) between the column spaces of two
// weight matrices of equal shape.
double largest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Symmetric inverse square root with an eigenvalue floor of 1e-10.
Eigen::MatrixXd inverse_sqrt_psd(const Eigen::MatrixXd& A);

}  // namespace tvpmai

#endif  // TVPMAI_MAI_HPP
