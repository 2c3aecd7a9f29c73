#ifndef TVPMAI_SIMULATION_HPP
#define TVPMAI_SIMULATION_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tvpmai/panel.hpp"

namespace tvpmai {

// Synthetic index-model data generator:
//   y_t = sum_h B_{h,t} f_{t-h} + eps_t,  f_t = omega' y_t,
//   eps_t ~ N(0, H_t)
// with an optional random-walk coefficient path and an optional volatility
// path (constant, one-off variance break, or EWMA-style evolution). The
// implied index VAR must keep its companion spectral radius below the guard.
struct DgpSpec {
  int n_series = 6;
  int q = 2;
  int p = 1;
  Eigen::MatrixXd omega_true;    // N x q; empty = random orthonormal columns
  std::vector<Eigen::MatrixXd> beta0;  // p lag blocks (N x q); empty = random,
                                       // rescaled to target_radius
  double target_radius = 0.6;    // spectral radius of randomly drawn dynamics
  double sigma_beta = 0.0;       // random-walk step std for the coefficients
  Eigen::MatrixXd H0;            // N x N PD; empty = identity
  double h_ewma_kappa = 1.0;     // < 1 turns on EWMA-style volatility motion
  int variance_break_at = -1;    // row index of a one-off variance break
  double variance_break_scale = 1.0;
  int T = 500;
  int burn_in = 100;
  std::uint64_t seed = 0;
  double spectral_guard = 0.98;

  void validate() const;
};

struct GroundTruth {
  Eigen::MatrixXd omega;                 // N x q
  std::vector<Eigen::VectorXd> beta_path;  // per kept t, stacked state layout
  std::vector<Eigen::MatrixXd> H_path;     // per kept t
};

struct SimulatedPanel {
  TimeSeriesPanel panel;  // tcodes all 1, synthetic quarterly dates
  GroundTruth truth;
};

// Spectral radius of the companion matrix of the index VAR alpha(L) implied
// by (omega, B_1..B_p).
double index_var_spectral_radius(const Eigen::MatrixXd& omega,
                                 const std::vector<Eigen::MatrixXd>& B);

SimulatedPanel simulate_mai(const DgpSpec& spec);

}  // namespace tvpmai

#endif  // TVPMAI_SIMULATION_HPP
