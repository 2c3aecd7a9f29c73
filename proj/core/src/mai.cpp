#include "tvpmai/mai.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tvpmai/csv.hpp"
#include "tvpmai/error.hpp"

namespace tvpmai {

namespace {

constexpr double kEigFloor = 1e-10;

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& Y) {
  const int T = static_cast<int>(Y.rows());
  if (T < 2) throw ValidationError("need at least two rows for a covariance");
  Eigen::MatrixXd centered = Y.rowwise() - Y.colwise().mean();
  return centered.transpose() * centered / double(T - 1);
}

}  // namespace

void ModelSpec::validate(int n_series) const {
  if (q < 1) throw ValidationError("q must be >= 1");
  if (q > n_series)
    throw ValidationError("q = " + std::to_string(q) + " exceeds the " +
                          std::to_string(n_series) + " available series");
  if (p < 1) throw ValidationError("p must be >= 1");
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw ValidationError("lambda must lie in (0, 1]");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw ValidationError("kappa must lie in (0, 1]");
  if (restriction) {
    restriction->validate();
    if (restriction->num_groups() != q)
      throw ValidationError("restriction has " +
                            std::to_string(restriction->num_groups()) +
                            " groups but q = " + std::to_string(q));
    if (restriction->total_series() != n_series)
      throw ValidationError("restriction covers " +
                            std::to_string(restriction->total_series()) +
                            " series, panel has " + std::to_string(n_series));
  }
}

std::string ModelSpec::fingerprint() const {
  std::ostringstream os;
  os << "q" << q << "_p" << p << "_l" << csv::format_sig(lambda) << "_k"
     << csv::format_sig(kappa);
  if (restriction) os << "_restricted";
  return os.str();
}

void IndexWeights::validate() const {
  if (omega.rows() == 0 || omega.cols() == 0 || omega.cols() > omega.rows())
    throw ValidationError("omega must be N x q with 1 <= q <= N");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega);
  if (svd.singularValues()[omega.cols() - 1] <= 1e-10)
    throw ValidationError("omega is rank deficient");
  if (groups) {
    const Restriction r = build_restriction(*groups);
    for (int j = 0; j < omega.cols(); ++j) {
      for (int i = 0; i < omega.rows(); ++i) {
        const double pat = r.pattern(i, j);
        if (std::isnan(pat)) continue;  // free entry
        if (omega(i, j) != pat)
          throw ValidationError("omega violates the block template at (" +
                                std::to_string(i) + ", " + std::to_string(j) +
                                ")");
      }
    }
  }
}

Eigen::MatrixXd build_indexes(const Eigen::MatrixXd& Y,
                              const Eigen::MatrixXd& omega) {
  if (Y.cols() != omega.rows())
    throw ValidationError("build_indexes: omega rows must match panel columns");
  return Y * omega;
}

std::vector<Eigen::MatrixXd> build_regressors(const Eigen::MatrixXd& indexes,
                                              int p, int n_series) {
  const int T = static_cast<int>(indexes.rows());
  const int q = static_cast<int>(indexes.cols());
  if (p < 1) throw ValidationError("p must be >= 1");
  if (T <= p) throw ValidationError("insufficient observations: T <= p");

  std::vector<Eigen::MatrixXd> Z;
  Z.reserve(T - p);
  Eigen::RowVectorXd lags(q * p);
  for (int t = p; t < T; ++t) {
    for (int h = 1; h <= p; ++h) lags.segment((h - 1) * q, q) = indexes.row(t - h);
    Eigen::MatrixXd Zt = Eigen::MatrixXd::Zero(n_series, n_series * q * p);
    for (int i = 0; i < n_series; ++i) Zt.block(i, i * q * p, 1, q * p) = lags;
    Z.push_back(std::move(Zt));
  }
  return Z;
}

Eigen::MatrixXd lag_coefficient_block(const Eigen::VectorXd& beta, int n_series,
                                      int q, int p, int h) {
  if (beta.size() != static_cast<Eigen::Index>(n_series) * q * p)
    throw ValidationError("state vector length does not match (N, q, p)");
  if (h < 1 || h > p) throw ValidationError("lag index out of range");
  Eigen::MatrixXd B(n_series, q);
  for (int i = 0; i < n_series; ++i)
    for (int j = 0; j < q; ++j) B(i, j) = beta[i * q * p + (h - 1) * q + j];
  return B;
}

Eigen::MatrixXd inverse_sqrt_psd(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((A + A.transpose()) * 0.5);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed in inverse square root");
  Eigen::VectorXd inv_sqrt = es.eigenvalues();
  for (int i = 0; i < inv_sqrt.size(); ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(std::max(inv_sqrt[i], kEigFloor));
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

IndexWeights omega_ols_step(const Eigen::MatrixXd& Y,
                            const std::vector<Eigen::VectorXd>& beta_path,
                            const std::vector<Eigen::MatrixXd>& H_path, int q,
                            int p,
                            const std::optional<GroupTemplate>& restriction) {
  const int T = static_cast<int>(Y.rows());
  const int N = static_cast<int>(Y.cols());
  if (q < 1) throw ValidationError("q must be >= 1");
  if (T <= p) throw ValidationError("insufficient observations: T <= p");
  if (static_cast<int>(beta_path.size()) != T - p ||
      static_cast<int>(H_path.size()) != T - p)
    throw ValidationError("coefficient/volatility paths must cover t = p..T-1");

  // Restriction in vec(omega) coordinates; identity when unrestricted.
  Eigen::MatrixXd M;
  Eigen::VectorXd pinned;
  std::optional<Restriction> restr;
  if (restriction) {
    restr = build_restriction(*restriction);
    if (restr->pattern.rows() != N || restr->pattern.cols() != q)
      throw ValidationError("restriction template shape does not match (N, q)");
    M = restr->M;
    pinned = restr->pinned;
  } else {
    M = Eigen::MatrixXd::Identity(N * q, N * q);
    pinned = Eigen::VectorXd::Zero(N * q);
  }
  const int n_free = static_cast<int>(M.cols());

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n_free, n_free);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n_free);
  Eigen::MatrixXd X(N, N * q);  // columns follow vec(omega), column-major

  for (int t = p; t < T; ++t) {
    const int s = t - p;
    const Eigen::MatrixXd Hw = inverse_sqrt_psd(H_path[s]);
    X.setZero();
    for (int h = 1; h <= p; ++h) {
      const Eigen::MatrixXd A = Hw * lag_coefficient_block(beta_path[s], N, q, p, h);
      for (int k = 0; k < N; ++k) {
        const double yk = Y(t - h, k);
        if (yk == 0.0) continue;
        for (int j = 0; j < q; ++j) X.col(j * N + k) += yk * A.col(j);
      }
    }
    const Eigen::VectorXd yw = Hw * Y.row(t).transpose();
    if (n_free == 0) continue;
    const Eigen::MatrixXd XM = X * M;
    const Eigen::VectorXd rhs = yw - X * pinned;
    G.noalias() += XM.transpose() * XM;
    g.noalias() += XM.transpose() * rhs;
  }

  Eigen::VectorXd free_loadings(n_free);
  if (n_free > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success ||
        d.minCoeff() < 1e-12 * std::max(1.0, d.maxCoeff()))
      throw NumericalError(
          "rank-deficient normal matrix in the omega regression; "
          "try fewer indexes or more data");
    free_loadings = ldlt.solve(g);
  }

  IndexWeights out;
  const Eigen::VectorXd v = pinned + (n_free > 0 ? (M * free_loadings).eval()
                                                 : Eigen::VectorXd::Zero(N * q));
  out.omega = Eigen::Map<const Eigen::MatrixXd>(v.data(), N, q);
  out.groups = restriction;
  return out;
}

IndexWeights init_omega_pca(const Eigen::MatrixXd& Y, int q) {
  const int N = static_cast<int>(Y.cols());
  if (q < 1) throw ValidationError("q must be >= 1");
  if (q > N) throw ValidationError("q exceeds the number of series");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample_covariance(Y));
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of the sample covariance failed");

  IndexWeights out;
  out.omega.resize(N, q);
  for (int j = 0; j < q; ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(N - 1 - j);  // descending
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.omega.col(j) = v;
  }
  return out;
}

namespace {

// Flat within-group start for restricted estimation: leaders at 1, free
// loadings at 1.
Eigen::MatrixXd restricted_init(const GroupTemplate& tmpl) {
  const Restriction r = build_restriction(tmpl);
  return r.assemble(Eigen::VectorXd::Ones(r.free_count()));
}

FilterResult run_filter(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& omega,
                        const ModelSpec& spec, const SwitchingOptions& options) {
  const int T = static_cast<int>(Y.rows());
  const Eigen::MatrixXd F = build_indexes(Y, omega);
  const std::vector<Eigen::MatrixXd> Z = build_regressors(F, spec.p, Y.cols());

  FilterConfig fc;
  fc.lambda = spec.lambda;
  fc.kappa = spec.kappa;
  fc.beta0_var_scale = options.beta0_var_scale;
  fc.jitter = options.jitter;
  if (options.h0_sample_cov) fc.H0 = sample_covariance(Y);
  return filter_pass(Y.bottomRows(T - spec.p), Z, fc);
}

}  // namespace

MaiFit switching_estimate(const Eigen::MatrixXd& Y, const ModelSpec& spec,
                          const SwitchingOptions& options) {
  const int T = static_cast<int>(Y.rows());
  const int N = static_cast<int>(Y.cols());
  spec.validate(N);
  if (options.max_iter < 1) throw ValidationError("max_iter must be >= 1");
  if (T < spec.p + N * spec.q)
    throw ValidationError("insufficient sample: need at least p + N*q = " +
                          std::to_string(spec.p + N * spec.q) +
                          " observations, have " + std::to_string(T));

  Eigen::MatrixXd omega;
  if (options.omega_init) {
    omega = *options.omega_init;
    if (omega.rows() != N || omega.cols() != spec.q)
      throw ValidationError("warm-start omega has the wrong shape");
  } else if (spec.restriction) {
    omega = restricted_init(*spec.restriction);
  } else {
    omega = init_omega_pca(Y, spec.q).omega;
  }

  // The unrestricted model is identified only up to an invertible q x q
  // transform, so raw iterates drift inside the equivalence class and never
  // settle entrywise. The working basis is therefore kept orthonormal and
  // convergence is measured on the column-space projector, the identified
  // object. The restricted model pins omega exactly; there the raw change
  // is the right metric and normalization would break the template.
  const bool normalize = !spec.restriction.has_value();
  if (normalize) omega = orthonormalize_columns(omega);

  MaiFit fit;
  fit.spec = spec;

  FilterResult res = run_filter(Y, omega, spec, options);
  fit.log_pl_trace.push_back(res.total_log_pl);

  Eigen::MatrixXd best_omega;
  FilterResult best_res;
  double best_lpl = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;

  for (int k = 1; k <= options.max_iter; ++k) {
    std::vector<Eigen::VectorXd> beta_path;
    std::vector<Eigen::MatrixXd> H_path;
    beta_path.reserve(res.beliefs.size());
    H_path.reserve(res.beliefs.size());
    for (const auto& b : res.beliefs) {
      beta_path.push_back(b.beta_mean);
      H_path.push_back(b.H);
    }
    IndexWeights next =
        omega_ols_step(Y, beta_path, H_path, spec.q, spec.p, spec.restriction);
    if (normalize) next.omega = orthonormalize_columns(next.omega);

    double delta;
    if (normalize) {
      const Eigen::MatrixXd P_old = omega * omega.transpose();
      const Eigen::MatrixXd P_new = next.omega * next.omega.transpose();
      delta = (P_new - P_old).norm() / P_old.norm();
    } else {
      delta = (next.omega - omega).norm() / std::max(omega.norm(), 1e-300);
    }
    iterations = k;

    FilterResult next_res = run_filter(Y, next.omega, spec, options);
    fit.log_pl_trace.push_back(next_res.total_log_pl);

    if (next_res.total_log_pl >= best_lpl) {
      best_lpl = next_res.total_log_pl;
      best_omega = next.omega;
      best_res = next_res;
    }

    omega = next.omega;
    res = std::move(next_res);

    if (delta < options.tol) {
      converged = true;
      break;
    }
  }

  fit.converged = converged;
  fit.iterations = iterations;
  if (converged) {
    fit.omega.omega = omega;
    fit.log_pl = res.total_log_pl;
    fit.beliefs = std::move(res.beliefs);
  } else {
    // Best iterate by log predictive likelihood among the omega updates.
    fit.omega.omega = best_omega;
    fit.log_pl = best_lpl;
    fit.beliefs = std::move(best_res.beliefs);
  }
  fit.omega.groups = spec.restriction;
  fit.omega.normalized = normalize;
  fit.omega.validate();
  fit.indexes = build_indexes(Y, fit.omega.omega);
  return fit;
}

MaiFit switching_estimate(const TimeSeriesPanel& panel, const ModelSpec& spec,
                          const SwitchingOptions& options) {
  return switching_estimate(panel.values, spec, options);
}

IteratedForecast iterate_forecast(const Eigen::MatrixXd& omega,
                                  const Eigen::VectorXd& beta,
                                  const Eigen::MatrixXd& beta_cov,
                                  const Eigen::MatrixXd& H,
                                  const Eigen::MatrixXd& y_tail, int p,
                                  double lambda, int h_max) {
  const int N = static_cast<int>(omega.rows());
  const int q = static_cast<int>(omega.cols());
  if (y_tail.rows() < p || y_tail.cols() != N)
    throw ValidationError("iterate_forecast: need the last p panel rows");
  if (h_max < 1) throw ValidationError("h_max must be >= 1");

  // VAR coefficients implied by the frozen state: A_h = B_h omega'.
  std::vector<Eigen::MatrixXd> A(p);
  for (int h = 1; h <= p; ++h)
    A[h - 1] = lag_coefficient_block(beta, N, q, p, h) * omega.transpose();

  // Point path: recent observations first, forecasts appended.
  std::vector<Eigen::VectorXd> path;
  for (int r = 0; r < p; ++r)
    path.push_back(y_tail.row(y_tail.rows() - p + r).transpose());

  IteratedForecast out;
  for (int s = 1; s <= h_max; ++s) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(N);
    for (int h = 1; h <= p; ++h) mean += A[h - 1] * path[path.size() - h];
    path.push_back(mean);
    out.means.push_back(std::move(mean));
  }

  // One-step covariance per the filter's predictive: the state prediction at
  // the origin uses Sigma / lambda and the Z row built from the observed tail.
  Eigen::RowVectorXd lags(q * p);
  for (int h = 1; h <= p; ++h)
    lags.segment((h - 1) * q, q) =
        (omega.transpose() * path[p - h]).transpose();
  Eigen::MatrixXd Z1 = Eigen::MatrixXd::Zero(N, N * q * p);
  for (int i = 0; i < N; ++i) Z1.block(i, i * q * p, 1, q * p) = lags;
  Eigen::MatrixXd C1 = H + Z1 * (beta_cov / lambda) * Z1.transpose();
  C1 = (C1 + C1.transpose()) * 0.5;

  // Forecast-error covariance through the companion recursion,
  // E_s = F E_{s-1} F' + S, seeded with C1 in the leading block.
  const int np = N * p;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(np, np);
  for (int h = 0; h < p; ++h) F.block(0, h * N, N, N) = A[h];
  if (p > 1) F.block(N, 0, N * (p - 1), N * (p - 1)).setIdentity();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(np, np);
  S.topLeftCorner(N, N) = H;

  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(np, np);
  E.topLeftCorner(N, N) = C1;
  out.covs.push_back(C1);
  for (int s = 2; s <= h_max; ++s) {
    E = (F * E * F.transpose() + S).eval();
    E = ((E + E.transpose()) * 0.5).eval();
    out.covs.push_back(E.topLeftCorner(N, N));
  }
  return out;
}

IteratedForecast iterate_forecast(const MaiFit& fit, const Eigen::MatrixXd& Y,
                                  int h_max) {
  if (fit.beliefs.empty()) throw ValidationError("fit has no filtered state");
  const KalmanBelief& last = fit.beliefs.back();
  return iterate_forecast(fit.omega.omega, last.beta_mean, last.beta_cov,
                          last.H, Y.bottomRows(fit.spec.p), fit.spec.p,
                          fit.spec.lambda, h_max);
}

Eigen::MatrixXd orthonormalize_columns(const Eigen::MatrixXd& omega) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(omega);
  Eigen::MatrixXd Q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(omega.rows(), omega.cols());
  for (int j = 0; j < Q.cols(); ++j) {
    int arg = 0;
    Q.col(j).cwiseAbs().maxCoeff(&arg);
    if (Q(arg, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

double largest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("principal angles need equal shapes");
  const Eigen::MatrixXd Qa = orthonormalize_columns(a);
  const Eigen::MatrixXd Qb = orthonormalize_columns(b);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Qa.transpose() * Qb);
  const double smin =
      std::clamp(svd.singularValues()[svd.singularValues().size() - 1], -1.0, 1.0);
  return std::acos(smin);
}

}  // namespace tvpmai
