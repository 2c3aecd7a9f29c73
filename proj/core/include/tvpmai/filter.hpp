#ifndef TVPMAI_FILTER_HPP
#define TVPMAI_FILTER_HPP

#include <Eigen/Dense>
#include <vector>

namespace tvpmai {

// Filtered state at one time step.
//
// The measurement model is y_t = Z_t beta_t + eps_t with eps_t ~ N(0, H_t)
// and a random-walk state beta_t = beta_{t-1} + eta_t. The forgetting factor
// lambda replaces the state-noise covariance: Sigma_{t|t-1} =
// Sigma_{t-1|t-1} / lambda, and H_t follows an EWMA driven by the one-step
// innovation.
struct KalmanBelief {
  int t = 0;
  Eigen::VectorXd beta_mean;      // beta_{t|t}
  Eigen::MatrixXd beta_cov;       // Sigma_{t|t}
  Eigen::MatrixXd H;              // EWMA estimate H_t (after the t update)
  Eigen::VectorXd resid;          // innovation y_t - Z_t beta_{t|t-1}
  double log_pred_density = 0.0;  // log p(y_t | Y_{t-1})
};

struct StatePrediction {
  Eigen::VectorXd mean;  // beta_{t|t-1}
  Eigen::MatrixXd cov;   // Sigma_{t|t-1}
};

struct PredictiveMoments {
  Eigen::VectorXd mean;  // Z_t beta_{t|t-1}
  Eigen::MatrixXd cov;   // H_t + Z_t Sigma_{t|t-1} Z_t'
  double logpdf = 0.0;   // log density at the realized y_t
};

struct FilterConfig {
  double lambda = 0.99;          // forgetting factor, (0, 1]
  double kappa = 0.96;           // EWMA decay, (0, 1]
  Eigen::VectorXd beta0_mean;    // empty = zeros
  double beta0_var_scale = 4.0;  // prior covariance = scale * I
  Eigen::MatrixXd H0;            // empty = identity
  double jitter = 1e-8;          // ridge added when a factorization stalls

  void validate() const;
};

struct FilterResult {
  std::vector<KalmanBelief> beliefs;  // one per usable time step
  double total_log_pl = 0.0;          // sum of log predictive densities
};

// Sigma_{t|t-1} = Sigma_{t-1|t-1} / lambda, random-walk mean. lambda = 1 is
// the constant-parameter case (implied Q = 0).
StatePrediction predict_state(const KalmanBelief& prev, double lambda);

// Measurement update. H_t here is the covariance used for step t, i.e. the
// EWMA estimate available before y_t arrives. Throws NumericalError if the
// innovation covariance stays singular after jitter.
KalmanBelief update_state(const StatePrediction& pred, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& Z, const Eigen::MatrixXd& H,
                          double jitter = 1e-8, int t = -1);

// One-step predictive moments and log density of y_t given t-1 info:
// y_t | Y_{t-1} ~ N(Z beta_{t|t-1}, H + Z Sigma_{t|t-1} Z').
PredictiveMoments predictive_density(const StatePrediction& pred,
                                     const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& Z,
                                     const Eigen::MatrixXd& H,
                                     double jitter = 1e-8, int t = -1);

// H_t = kappa H_{t-1} + (1 - kappa) r r'. Result is symmetrized exactly.
Eigen::MatrixXd ewma_update(const Eigen::MatrixXd& H_prev,
                            const Eigen::VectorXd& resid, double kappa);

// Full forward pass over aligned (y_t, Z_t) pairs. Y has one row per usable
// step; Z[t] is the matching measurement matrix. Per step:
// predict -> predictive density -> update -> EWMA. The first residual comes
// from the prior predictive.
FilterResult filter_pass(const Eigen::MatrixXd& Y,
                         const std::vector<Eigen::MatrixXd>& Z,
                         const FilterConfig& config);

// Multivariate normal log density with a jittered LLT factorization.
// Exposed because the pool and evaluation layers score realized values
// against Gaussian predictive distributions.
double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov, double jitter = 1e-8);

// Columnar dump for inspection: one row per (t, state index) with the state
// mean and covariance diagonal, plus per-t vech(H) and the log predictive
// density on the first state row.
void write_beliefs_csv(const std::vector<KalmanBelief>& beliefs,
                       const std::string& path);

}  // namespace tvpmai

#endif  // TVPMAI_FILTER_HPP
