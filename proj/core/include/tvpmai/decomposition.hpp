#ifndef TVPMAI_DECOMPOSITION_HPP
#define TVPMAI_DECOMPOSITION_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tvpmai {

struct MaiFit;  // mai.hpp

// Block identification template: series are grouped contiguously, one group
// per index. Within a group, the leading series loads with exactly 1 on its
// own index and 0 elsewhere; the remaining loadings are free.
struct GroupTemplate {
  std::vector<int> group_sizes;          // q entries, summing to N
  std::vector<std::string> group_names;  // optional, q entries (RI, NI, ...)

  int num_groups() const { return static_cast<int>(group_sizes.size()); }
  int total_series() const;
  void validate() const;

  // Builds a template from per-series labels (panel order); labels must be
  // contiguous by group.
  static GroupTemplate from_labels(const std::vector<std::string>& labels);
};

// Restriction machinery for the block template, in vec(omega) coordinates
// (column-major stacking of the N x q weight matrix):
//   vec(omega) = M * free + pinned
// where M has one unit column per free loading and `pinned` carries the
// exact 1s of the group leaders.
struct Restriction {
  Eigen::MatrixXd pattern;  // N x q: 1 at pinned leaders, NaN marks free, 0 fixed
  Eigen::MatrixXd M;        // (N*q) x n_free selector
  Eigen::VectorXd pinned;   // length N*q offset vector

  int free_count() const { return static_cast<int>(M.cols()); }
  // Assembles the full weight matrix from free loadings.
  Eigen::MatrixXd assemble(const Eigen::VectorXd& free) const;
};

Restriction build_restriction(const GroupTemplate& tmpl);

// Rows form an orthonormal basis of the orthogonal complement of the column
// space of omega_star; returns a (N - q) x N matrix (0 x N when q = N).
Eigen::MatrixXd orthogonal_complement(const Eigen::MatrixXd& omega_star);

// Common/idiosyncratic volatility split induced by the index directions.
// With W = omega_star' (q x N) and xi = W H W':
//   H_com  = H W' xi^{-1} W H
//   H_idio = Wp' (Wp H^{-1} Wp')^{-1} Wp,  Wp = orthogonal complement rows.
// The two parts add back to H exactly.
struct VolShares {
  int t = 0;
  Eigen::MatrixXd H_com;
  Eigen::MatrixXd H_idio;
  Eigen::VectorXd share_common;  // diag(H_com) / diag(H), in [0, 1]
};

VolShares variance_decompose(const Eigen::MatrixXd& H,
                             const Eigen::MatrixXd& omega_star,
                             double jitter = 1e-8, int t = 0);

// Per-variable common-volatility share over a filtered H path. Rows align
// with the H sequence.
Eigen::MatrixXd share_series(const std::vector<Eigen::MatrixXd>& H_path,
                             const Eigen::MatrixXd& omega_star,
                             double jitter = 1e-8);
Eigen::MatrixXd share_series(const MaiFit& fit, const GroupTemplate& tmpl,
                             double jitter = 1e-8);

}  // namespace tvpmai

#endif  // TVPMAI_DECOMPOSITION_HPP
