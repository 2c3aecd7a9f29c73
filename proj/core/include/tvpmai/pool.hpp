#ifndef TVPMAI_POOL_HPP
#define TVPMAI_POOL_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tvpmai/mai.hpp"

namespace tvpmai {

// Dynamic model pool over a grid of candidate specs. Model probabilities
// follow the forgetting recursion
//   pi_{t|t-1,k} = pi_{t-1|t-1,k}^alpha / sum_l pi_{t-1|t-1,l}^alpha
//   pi_{t|t,k}  propto  pi_{t|t-1,k} p_k(y_t | Y_{t-1})
// with alpha = 1 reducing to Bayesian model averaging. All weight
// arithmetic runs in log space.
struct PoolState {
  std::vector<ModelSpec> specs;
  Eigen::VectorXd pi_pred;  // pi_{t|t-1}
  Eigen::VectorXd pi_post;  // pi_{t|t}
  double alpha = 0.99;
};

enum class PoolMode { kDma, kDms };

double log_sum_exp(const Eigen::VectorXd& logs);

Eigen::VectorXd pool_predict_weights(const Eigen::VectorXd& pi_post_prev,
                                     double alpha);

// Bayes update of the weights with per-model one-step log predictive
// densities. Non-finite entries are treated as a failed model step (weight
// goes to zero for that step). Throws when every model fails.
Eigen::VectorXd pool_update_weights(const Eigen::VectorXd& pi_pred,
                                    const Eigen::VectorXd& log_pred_liks);

// Log-domain forms of the two recursions, normalized so log-sum-exp is 0.
// The multi-step recursions run entirely on these: probabilities whose
// ratios exceed the double range would otherwise truncate to exact zeros
// and could never recover.
Eigen::VectorXd log_pool_predict_weights(const Eigen::VectorXd& log_pi,
                                         double alpha);
Eigen::VectorXd log_pool_update_weights(const Eigen::VectorXd& log_pi_pred,
                                        const Eigen::VectorXd& log_pred_liks);

// Finite Gaussian mixture over per-model predictive distributions.
struct GaussianMixture {
  Eigen::VectorXd weights;             // K, simplex
  std::vector<Eigen::VectorXd> means;  // K entries, each length N
  std::vector<Eigen::MatrixXd> covs;   // K entries, each N x N

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }

  Eigen::VectorXd mean() const;                   // weight-convex combination
  double logpdf(const Eigen::VectorXd& x) const;  // joint mixture density
  // Marginal mixture density / variance of one coordinate.
  double marginal_logpdf(int i, double x) const;
  double marginal_variance(int i) const;
};

// The DMA predictive: weights applied to per-model predictive moments. The
// returned mixture is both the point forecast (its mean) and the density
// evaluator used for scoring.
GaussianMixture dma_forecast(const Eigen::VectorXd& pi_pred,
                             const std::vector<Eigen::VectorXd>& means,
                             const std::vector<Eigen::MatrixXd>& covs);

// Argmax model under pi_pred, lowest index on ties. 0-based.
int dms_select(const Eigen::VectorXd& pi_pred);

struct PoolStep {
  int t = 0;                 // row index in the panel
  Eigen::VectorXd pi_pred;
  Eigen::VectorXd pi_post;
  Eigen::VectorXd log_dens;  // per-model log p_k(y_t | Y_{t-1})
  int selected = 0;          // argmax of pi_pred
};

struct PoolForecast {
  int origin = 0;   // information through this row
  int horizon = 1;
  GaussianMixture dist;  // DMA mixture, or the selected model alone for DMS
};

struct PoolRunResult {
  std::vector<ModelSpec> specs;
  std::vector<std::optional<MaiFit>> fits;  // nullopt where estimation failed
  std::vector<std::string> warnings;
  std::vector<PoolStep> steps;              // t = max lag .. T-1
  std::vector<PoolForecast> forecasts;
  PoolState final_state;                    // weights after the last step
  Eigen::VectorXd total_log_pl;             // per model, over the common range
  std::vector<int> ranking;                 // model indices, log PL descending
};

struct PoolRunOptions {
  double alpha = 0.99;
  PoolMode mode = PoolMode::kDma;
  std::vector<int> horizons = {1};  // forecast horizons emitted per origin
  bool emit_forecasts = false;
  SwitchingOptions switching;
  int workers = 1;
  std::function<void(const std::string&)> warn;  // optional warning sink
};

// Fits every spec (in parallel when workers > 1), then runs the weight
// recursion over the common usable range. Failed models keep -inf density
// at every step and a warning is recorded rather than aborting the pool.
PoolRunResult run_pool(const Eigen::MatrixXd& Y,
                       const std::vector<ModelSpec>& specs,
                       const PoolRunOptions& options = {});

}  // namespace tvpmai

#endif  // TVPMAI_POOL_HPP
