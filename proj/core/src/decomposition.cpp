#include "tvpmai/decomposition.hpp"

#include <cmath>
#include <limits>

#include "tvpmai/error.hpp"
#include "tvpmai/mai.hpp"

namespace tvpmai {

int GroupTemplate::total_series() const {
  int n = 0;
  for (int g : group_sizes) n += g;
  return n;
}

void GroupTemplate::validate() const {
  if (group_sizes.empty()) throw ValidationError("template has no groups");
  for (int g : group_sizes)
    if (g < 1) throw ValidationError("every group must contain at least one series");
  if (!group_names.empty() && group_names.size() != group_sizes.size())
    throw ValidationError("group name count does not match group count");
}

GroupTemplate GroupTemplate::from_labels(const std::vector<std::string>& labels) {
  if (labels.empty()) throw ValidationError("no group labels given");
  GroupTemplate tmpl;
  std::string cur = labels[0];
  int count = 0;
  for (const auto& l : labels) {
    if (l == cur) {
      ++count;
      continue;
    }
    for (const auto& seen : tmpl.group_names)
      if (seen == l)
        throw ValidationError("group label '" + l +
                              "' is not contiguous in panel order");
    tmpl.group_names.push_back(cur);
    tmpl.group_sizes.push_back(count);
    cur = l;
    count = 1;
  }
  tmpl.group_names.push_back(cur);
  tmpl.group_sizes.push_back(count);
  tmpl.validate();
  return tmpl;
}

Eigen::MatrixXd Restriction::assemble(const Eigen::VectorXd& free) const {
  if (free.size() != M.cols())
    throw ValidationError("free loading count does not match restriction");
  Eigen::VectorXd v = pinned;
  if (M.cols() > 0) v += M * free;
  const int nq = static_cast<int>(v.size());
  const int q = static_cast<int>(pattern.cols());
  const int N = static_cast<int>(pattern.rows());
  if (nq != N * q) throw ValidationError("restriction shape mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), N, q);
}

Restriction build_restriction(const GroupTemplate& tmpl) {
  tmpl.validate();
  const int q = tmpl.num_groups();
  const int N = tmpl.total_series();

  Restriction r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.pattern = Eigen::MatrixXd::Zero(N, q);
  r.pinned = Eigen::VectorXd::Zero(N * q);

  std::vector<int> free_positions;  // vec(omega) indices, column-major
  int row = 0;
  for (int j = 0; j < q; ++j) {
    const int start = row;
    for (int i = 0; i < tmpl.group_sizes[j]; ++i, ++row) {
      const int vec_pos = j * N + row;
      if (row == start) {
        r.pattern(row, j) = 1.0;
        r.pinned[vec_pos] = 1.0;
      } else {
        r.pattern(row, j) = nan;
        free_positions.push_back(vec_pos);
      }
    }
  }

  r.M = Eigen::MatrixXd::Zero(N * q, static_cast<int>(free_positions.size()));
  for (std::size_t c = 0; c < free_positions.size(); ++c)
    r.M(free_positions[c], static_cast<int>(c)) = 1.0;
  return r;
}

Eigen::MatrixXd orthogonal_complement(const Eigen::MatrixXd& omega_star) {
  const int N = static_cast<int>(omega_star.rows());
  const int q = static_cast<int>(omega_star.cols());
  if (q > N) throw ValidationError("omega has more columns than rows");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega_star, Eigen::ComputeFullU);
  if (q > 0 && svd.singularValues()[q - 1] < 1e-10)
    throw ValidationError("omega is rank deficient; no well-defined complement");
  // Left singular vectors beyond the rank span the complement.
  return svd.matrixU().rightCols(N - q).transpose();
}

VolShares variance_decompose(const Eigen::MatrixXd& H,
                             const Eigen::MatrixXd& omega_star, double jitter,
                             int t) {
  const int N = static_cast<int>(H.rows());
  const int q = static_cast<int>(omega_star.cols());
  if (H.cols() != N || omega_star.rows() != N)
    throw ValidationError("variance_decompose: nonconformable dimensions");

  Eigen::MatrixXd Hs = (H + H.transpose()) * 0.5;
  Eigen::LLT<Eigen::MatrixXd> llt(Hs);
  if (llt.info() != Eigen::Success) {
    Hs += jitter * Eigen::MatrixXd::Identity(N, N);
    llt.compute(Hs);
    if (llt.info() != Eigen::Success)
      throw NumericalError("H singular beyond jitter rescue at t=" +
                               std::to_string(t),
                           t);
  }

  const Eigen::MatrixXd W = omega_star.transpose();  // q x N
  VolShares out;
  out.t = t;

  // Common part: H W' (W H W')^{-1} W H.
  const Eigen::MatrixXd HW = Hs * W.transpose();     // N x q
  Eigen::MatrixXd xi = W * HW;                       // q x q
  xi = (xi + xi.transpose()) * 0.5;
  Eigen::LLT<Eigen::MatrixXd> xillt(xi);
  if (xillt.info() != Eigen::Success)
    throw NumericalError("index covariance singular at t=" + std::to_string(t), t);
  out.H_com = HW * xillt.solve(HW.transpose());

  // Idiosyncratic part through the complement; empty complement means the
  // indexes span everything.
  const Eigen::MatrixXd Wp = orthogonal_complement(omega_star);  // (N-q) x N
  if (Wp.rows() == 0) {
    out.H_idio = Eigen::MatrixXd::Zero(N, N);
  } else {
    const Eigen::MatrixXd Hinv_Wpt = llt.solve(Wp.transpose());  // N x (N-q)
    Eigen::MatrixXd core = Wp * Hinv_Wpt;                        // (N-q) x (N-q)
    core = (core + core.transpose()) * 0.5;
    Eigen::LLT<Eigen::MatrixXd> cllt(core);
    if (cllt.info() != Eigen::Success)
      throw NumericalError("complement projection singular at t=" +
                               std::to_string(t),
                           t);
    out.H_idio = Wp.transpose() * cllt.solve(Wp);
  }
  out.H_com = (out.H_com + out.H_com.transpose()) * 0.5;
  out.H_idio = (out.H_idio + out.H_idio.transpose()) * 0.5;

  out.share_common.resize(N);
  for (int i = 0; i < N; ++i) out.share_common[i] = out.H_com(i, i) / Hs(i, i);
  return out;
}

Eigen::MatrixXd share_series(const std::vector<Eigen::MatrixXd>& H_path,
                             const Eigen::MatrixXd& omega_star, double jitter) {
  const int T = static_cast<int>(H_path.size());
  const int N = static_cast<int>(omega_star.rows());
  Eigen::MatrixXd shares(T, N);
  for (int t = 0; t < T; ++t) {
    const VolShares v = variance_decompose(H_path[t], omega_star, jitter, t);
    shares.row(t) = v.share_common.transpose();
  }
  return shares;
}

Eigen::MatrixXd share_series(const MaiFit& fit, const GroupTemplate& tmpl,
                             double jitter) {
  tmpl.validate();
  std::vector<Eigen::MatrixXd> H_path;
  H_path.reserve(fit.beliefs.size());
  for (const auto& b : fit.beliefs) H_path.push_back(b.H);
  return share_series(H_path, fit.omega.omega, jitter);
}

}  // namespace tvpmai
