#include "tvpmai/filter.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "tvpmai/csv.hpp"
#include "tvpmai/error.hpp"

namespace tvpmai {

namespace {

void symmetrize(Eigen::MatrixXd& A) { A = ((A + A.transpose()) * 0.5).eval(); }

// LLT with the jitter policy: retry once with jitter * I when the matrix is
// not numerically positive definite (failed factorization or a pivot below
// 1e-12). Throws NumericalError on a second failure.
Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& A, double jitter,
                                       int t, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const auto& L = llt.matrixLLT();
    for (int i = 0; i < L.rows(); ++i) {
      if (L(i, i) * L(i, i) < 1e-12) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) {
    Eigen::MatrixXd Aj = A + jitter * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    llt.compute(Aj);
    if (llt.info() != Eigen::Success) {
      throw NumericalError(std::string(what) +
                               " singular after jitter at t=" + std::to_string(t),
                           t);
    }
  }
  return llt;
}

double logpdf_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt,
                       const Eigen::VectorXd& resid) {
  const int n = static_cast<int>(resid.size());
  double logdet = 0.0;
  const auto& L = llt.matrixLLT();
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
  const double quad = resid.dot(llt.solve(resid));
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

}  // namespace

void FilterConfig::validate() const {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw ValidationError("lambda must lie in (0, 1]");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw ValidationError("kappa must lie in (0, 1]");
  if (!(beta0_var_scale > 0.0))
    throw ValidationError("beta0_var_scale must be positive");
  if (!(jitter >= 0.0)) throw ValidationError("jitter must be nonnegative");
}

StatePrediction predict_state(const KalmanBelief& prev, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw ValidationError("lambda must lie in (0, 1]");
  StatePrediction pred;
  pred.mean = prev.beta_mean;
  pred.cov = prev.beta_cov / lambda;
  symmetrize(pred.cov);
  return pred;
}

KalmanBelief update_state(const StatePrediction& pred, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& Z, const Eigen::MatrixXd& H,
                          double jitter, int t) {
  const int n = static_cast<int>(y.size());
  const int s = static_cast<int>(pred.mean.size());
  if (Z.rows() != n || Z.cols() != s || H.rows() != n || H.cols() != n)
    throw ValidationError("update_state: nonconformable dimensions");

  Eigen::MatrixXd S = H + Z * pred.cov * Z.transpose();
  symmetrize(S);
  const auto llt = robust_llt(S, jitter, t, "innovation covariance");

  KalmanBelief out;
  out.t = t;
  out.resid = y - Z * pred.mean;
  // Gain K = Sigma Z' S^{-1}, via S^{-1} (Z Sigma) for stability.
  Eigen::MatrixXd K = llt.solve(Z * pred.cov).transpose();
  out.beta_mean = pred.mean + K * out.resid;
  // Joseph form keeps Sigma_{t|t} PSD.
  Eigen::MatrixXd IKZ = Eigen::MatrixXd::Identity(s, s) - K * Z;
  out.beta_cov = IKZ * pred.cov * IKZ.transpose() + K * H * K.transpose();
  symmetrize(out.beta_cov);
  return out;
}

PredictiveMoments predictive_density(const StatePrediction& pred,
                                     const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& Z,
                                     const Eigen::MatrixXd& H, double jitter,
                                     int t) {
  const int n = static_cast<int>(y.size());
  const int s = static_cast<int>(pred.mean.size());
  if (Z.rows() != n || Z.cols() != s || H.rows() != n || H.cols() != n)
    throw ValidationError("predictive_density: nonconformable dimensions");

  PredictiveMoments out;
  out.mean = Z * pred.mean;
  out.cov = H + Z * pred.cov * Z.transpose();
  symmetrize(out.cov);
  const auto llt = robust_llt(out.cov, jitter, t, "predictive covariance");
  out.logpdf = logpdf_from_llt(llt, y - out.mean);
  return out;
}

Eigen::MatrixXd ewma_update(const Eigen::MatrixXd& H_prev,
                            const Eigen::VectorXd& resid, double kappa) {
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw ValidationError("kappa must lie in (0, 1]");
  Eigen::MatrixXd H = kappa * H_prev + (1.0 - kappa) * resid * resid.transpose();
  symmetrize(H);
  return H;
}

FilterResult filter_pass(const Eigen::MatrixXd& Y,
                         const std::vector<Eigen::MatrixXd>& Z,
                         const FilterConfig& config) {
  config.validate();
  const int T = static_cast<int>(Y.rows());
  const int n = static_cast<int>(Y.cols());
  if (T == 0) throw ValidationError("insufficient observations: empty sample");
  if (static_cast<int>(Z.size()) != T)
    throw ValidationError("filter_pass: Z sequence length does not match Y");
  const int s = static_cast<int>(Z[0].cols());

  KalmanBelief prev;
  prev.t = -1;
  prev.beta_mean =
      config.beta0_mean.size() ? config.beta0_mean : Eigen::VectorXd::Zero(s);
  if (prev.beta_mean.size() != s)
    throw ValidationError("beta0_mean length does not match state dimension");
  prev.beta_cov = config.beta0_var_scale * Eigen::MatrixXd::Identity(s, s);

  Eigen::MatrixXd H =
      config.H0.size() ? config.H0 : Eigen::MatrixXd::Identity(n, n);
  if (H.rows() != n || H.cols() != n)
    throw ValidationError("H0 dimensions do not match the observation vector");

  FilterResult result;
  result.beliefs.reserve(T);
  for (int t = 0; t < T; ++t) {
    const StatePrediction pred = predict_state(prev, config.lambda);
    const PredictiveMoments dens =
        predictive_density(pred, Y.row(t).transpose(), Z[t], H, config.jitter, t);
    KalmanBelief belief = update_state(pred, Y.row(t).transpose(), Z[t], H,
                                       config.jitter, t);
    H = ewma_update(H, belief.resid, config.kappa);
    belief.H = H;
    belief.log_pred_density = dens.logpdf;
    result.total_log_pl += dens.logpdf;
    result.beliefs.push_back(std::move(belief));
    prev = result.beliefs.back();
  }
  return result;
}

double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov, double jitter) {
  Eigen::MatrixXd C = cov;
  symmetrize(C);
  const auto llt = robust_llt(C, jitter, -1, "density covariance");
  return logpdf_from_llt(llt, x - mean);
}

void write_beliefs_csv(const std::vector<KalmanBelief>& beliefs,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "t,state_index,beta_mean,beta_var,vech_H,logpdf\n";
  for (const auto& b : beliefs) {
    const int s = static_cast<int>(b.beta_mean.size());
    const int n = static_cast<int>(b.H.rows());
    for (int i = 0; i < s; ++i) {
      out << b.t << "," << i << "," << csv::format_sig(b.beta_mean[i]) << ","
          << csv::format_sig(b.beta_cov(i, i)) << ",";
      if (i == 0) {
        std::string sep;
        for (int c = 0; c < n; ++c)
          for (int r = c; r < n; ++r) {
            out << sep << csv::format_sig(b.H(r, c));
            sep = ";";
          }
        out << "," << csv::format_sig(b.log_pred_density);
      } else {
        out << ",";
      }
      out << "\n";
    }
  }
}

}  // namespace tvpmai
