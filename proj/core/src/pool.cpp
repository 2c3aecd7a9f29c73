#include "tvpmai/pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tvpmai/error.hpp"
#include "tvpmai/parallel.hpp"

namespace tvpmai {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_sum_exp(const Eigen::VectorXd& logs) {
  const double m = logs.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a NaN poisoned max)
  double acc = 0.0;
  for (int i = 0; i < logs.size(); ++i) acc += std::exp(logs[i] - m);
  return m + std::log(acc);
}

Eigen::VectorXd log_pool_predict_weights(const Eigen::VectorXd& log_pi,
                                         double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ValidationError("alpha must lie in (0, 1]");
  const int K = static_cast<int>(log_pi.size());
  if (K == 0) throw ValidationError("empty pool");
  if (!std::isfinite(log_pi.maxCoeff()))
    throw ValidationError("degenerate pool: all weights zero");

  Eigen::VectorXd logw(K);
  for (int k = 0; k < K; ++k)
    logw[k] = std::isfinite(log_pi[k]) ? alpha * log_pi[k] : kNegInf;
  const double norm = log_sum_exp(logw);
  return logw.array() - norm;
}

Eigen::VectorXd log_pool_update_weights(const Eigen::VectorXd& log_pi_pred,
                                        const Eigen::VectorXd& log_pred_liks) {
  const int K = static_cast<int>(log_pi_pred.size());
  if (log_pred_liks.size() != K)
    throw ValidationError("weight/likelihood length mismatch");

  Eigen::VectorXd logw(K);
  for (int k = 0; k < K; ++k) {
    const double l = std::isfinite(log_pred_liks[k]) ? log_pred_liks[k] : kNegInf;
    logw[k] = std::isfinite(log_pi_pred[k]) ? log_pi_pred[k] + l : kNegInf;
  }
  const double norm = log_sum_exp(logw);
  if (!std::isfinite(norm))
    throw NumericalError("pool collapse: no model has finite predictive density");
  return logw.array() - norm;
}

namespace {

Eigen::VectorXd to_log(const Eigen::VectorXd& pi) {
  Eigen::VectorXd logs(pi.size());
  for (int k = 0; k < pi.size(); ++k)
    logs[k] = pi[k] > 0.0 ? std::log(pi[k]) : kNegInf;
  return logs;
}

Eigen::VectorXd from_log(const Eigen::VectorXd& logs) {
  Eigen::VectorXd pi(logs.size());
  for (int k = 0; k < logs.size(); ++k)
    pi[k] = std::isfinite(logs[k]) ? std::exp(logs[k]) : 0.0;
  return pi;
}

}  // namespace

Eigen::VectorXd pool_predict_weights(const Eigen::VectorXd& pi_post_prev,
                                     double alpha) {
  return from_log(log_pool_predict_weights(to_log(pi_post_prev), alpha));
}

Eigen::VectorXd pool_update_weights(const Eigen::VectorXd& pi_pred,
                                    const Eigen::VectorXd& log_pred_liks) {
  return from_log(log_pool_update_weights(to_log(pi_pred), log_pred_liks));
}

Eigen::VectorXd GaussianMixture::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
  for (int k = 0; k < components(); ++k) m += weights[k] * means[k];
  return m;
}

double GaussianMixture::logpdf(const Eigen::VectorXd& x) const {
  Eigen::VectorXd logs(components());
  for (int k = 0; k < components(); ++k) {
    logs[k] = weights[k] > 0.0
                  ? std::log(weights[k]) + gaussian_logpdf(x, means[k], covs[k])
                  : kNegInf;
  }
  return log_sum_exp(logs);
}

double GaussianMixture::marginal_logpdf(int i, double x) const {
  Eigen::VectorXd logs(components());
  for (int k = 0; k < components(); ++k) {
    if (weights[k] <= 0.0) {
      logs[k] = kNegInf;
      continue;
    }
    const double var = covs[k](i, i);
    if (!(var > 0.0)) {
      logs[k] = kNegInf;
      continue;
    }
    const double z = x - means[k][i];
    logs[k] = std::log(weights[k]) -
              0.5 * (std::log(2.0 * std::numbers::pi * var) + z * z / var);
  }
  return log_sum_exp(logs);
}

double GaussianMixture::marginal_variance(int i) const {
  double m = 0.0, second = 0.0;
  for (int k = 0; k < components(); ++k) {
    m += weights[k] * means[k][i];
    second += weights[k] * (covs[k](i, i) + means[k][i] * means[k][i]);
  }
  return second - m * m;
}

GaussianMixture dma_forecast(const Eigen::VectorXd& pi_pred,
                             const std::vector<Eigen::VectorXd>& means,
                             const std::vector<Eigen::MatrixXd>& covs) {
  const int K = static_cast<int>(pi_pred.size());
  if (static_cast<int>(means.size()) != K || static_cast<int>(covs.size()) != K)
    throw ValidationError("dma_forecast: component count mismatch");
  if (K == 0) throw ValidationError("empty pool");
  GaussianMixture mix;
  mix.weights = pi_pred;
  mix.means = means;
  mix.covs = covs;
  return mix;
}

int dms_select(const Eigen::VectorXd& pi_pred) {
  if (pi_pred.size() == 0) throw ValidationError("empty pool");
  int best = 0;
  for (int k = 1; k < pi_pred.size(); ++k)
    if (pi_pred[k] > pi_pred[best]) best = k;
  return best;
}

PoolRunResult run_pool(const Eigen::MatrixXd& Y,
                       const std::vector<ModelSpec>& specs,
                       const PoolRunOptions& options) {
  const int T = static_cast<int>(Y.rows());
  const int N = static_cast<int>(Y.cols());
  const int K = static_cast<int>(specs.size());
  if (K == 0) throw ValidationError("empty model pool");
  if (!(options.alpha > 0.0 && options.alpha <= 1.0))
    throw ValidationError("alpha must lie in (0, 1]");
  for (const auto& s : specs) s.validate(N);

  PoolRunResult result;
  result.specs = specs;
  result.fits.resize(K);
  std::vector<std::string> failures(K);

  parallel_for(K, options.workers, [&](int k) {
    try {
      result.fits[k] = switching_estimate(Y, specs[k], options.switching);
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });
  for (int k = 0; k < K; ++k) {
    if (!failures[k].empty()) {
      const std::string msg =
          "model " + specs[k].fingerprint() + " failed: " + failures[k];
      result.warnings.push_back(msg);
      if (options.warn) options.warn(msg);
    }
  }

  int max_p = 1;
  for (const auto& s : specs) max_p = std::max(max_p, s.p);
  if (T <= max_p) throw ValidationError("insufficient observations for the pool");

  // Weight recursion over the common range t = max_p .. T-1, carried in
  // log space end to end.
  Eigen::VectorXd log_pi_post =
      Eigen::VectorXd::Constant(K, -std::log(double(K)));
  result.total_log_pl = Eigen::VectorXd::Zero(K);
  result.steps.reserve(T - max_p);

  for (int t = max_p; t < T; ++t) {
    PoolStep step;
    step.t = t;
    const Eigen::VectorXd log_pi_pred =
        log_pool_predict_weights(log_pi_post, options.alpha);
    step.pi_pred = from_log(log_pi_pred);
    step.log_dens.resize(K);
    for (int k = 0; k < K; ++k) {
      if (!result.fits[k]) {
        step.log_dens[k] = kNegInf;
        continue;
      }
      const auto& beliefs = result.fits[k]->beliefs;
      const int idx = t - specs[k].p;
      step.log_dens[k] = beliefs[idx].log_pred_density;
      if (std::isfinite(step.log_dens[k]))
        result.total_log_pl[k] += step.log_dens[k];
    }
    try {
      log_pi_post = log_pool_update_weights(log_pi_pred, step.log_dens);
    } catch (const NumericalError&) {
      throw NumericalError("pool collapse at t=" + std::to_string(t), t);
    }
    step.pi_post = from_log(log_pi_post);
    step.selected = dms_select(step.pi_pred);

    if (options.emit_forecasts) {
      // Weights formed at the origin apply to every horizon.
      const Eigen::VectorXd pi_origin =
          from_log(log_pool_predict_weights(log_pi_post, options.alpha));
      const int h_max =
          *std::max_element(options.horizons.begin(), options.horizons.end());
      std::vector<IteratedForecast> per_model(K);
      for (int k = 0; k < K; ++k) {
        if (!result.fits[k]) continue;
        const auto& fit = *result.fits[k];
        const auto& b = fit.beliefs[t - specs[k].p];
        per_model[k] = iterate_forecast(fit.omega.omega, b.beta_mean,
                                        b.beta_cov, b.H,
                                        Y.middleRows(t - specs[k].p + 1, specs[k].p),
                                        specs[k].p, specs[k].lambda, h_max);
      }
      for (int h : options.horizons) {
        PoolForecast fc;
        fc.origin = t;
        fc.horizon = h;
        std::vector<Eigen::VectorXd> means;
        std::vector<Eigen::MatrixXd> covs;
        Eigen::VectorXd w(K);
        for (int k = 0; k < K; ++k) {
          if (!result.fits[k]) {
            w[k] = 0.0;
            means.push_back(Eigen::VectorXd::Zero(N));
            covs.push_back(Eigen::MatrixXd::Identity(N, N));
            continue;
          }
          w[k] = pi_origin[k];
          means.push_back(per_model[k].means[h - 1]);
          covs.push_back(per_model[k].covs[h - 1]);
        }
        const double ws = w.sum();
        if (ws <= 0.0) throw NumericalError("pool collapse at t=" + std::to_string(t), t);
        w /= ws;
        if (options.mode == PoolMode::kDms) {
          const int sel = dms_select(w);
          Eigen::VectorXd one = Eigen::VectorXd::Zero(K);
          one[sel] = 1.0;
          fc.dist = dma_forecast(one, means, covs);
        } else {
          fc.dist = dma_forecast(w, means, covs);
        }
        result.forecasts.push_back(std::move(fc));
      }
    }
    result.steps.push_back(std::move(step));
  }

  result.final_state.specs = specs;
  result.final_state.alpha = options.alpha;
  result.final_state.pi_pred = result.steps.back().pi_pred;
  result.final_state.pi_post = result.steps.back().pi_post;

  // Ranking by accumulated log predictive likelihood, failures last.
  result.ranking.resize(K);
  std::iota(result.ranking.begin(), result.ranking.end(), 0);
  std::stable_sort(result.ranking.begin(), result.ranking.end(),
                   [&](int a, int b) {
                     const double la =
                         result.fits[a] ? result.total_log_pl[a] : kNegInf;
                     const double lb =
                         result.fits[b] ? result.total_log_pl[b] : kNegInf;
                     return la > lb;
                   });
  return result;
}

}  // namespace tvpmai
