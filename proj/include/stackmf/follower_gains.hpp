#pragma once

#include <Eigen/Dense>

#include <optional>

#include "stackmf/grid_function.hpp"
#include "stackmf/model.hpp"

namespace stackmf {

/// Team-mode weights: Q_Gamma = Gamma^T Q + Q Gamma - Gamma^T Q Gamma,
/// Q_Gamma1 = Q Gamma1 - Gamma^T Q Gamma1, Q_eta = (Q - Gamma^T Q) eta.
struct TeamWeights {
  Eigen::MatrixXd Q_Gamma;
  Eigen::MatrixXd Q_Gamma1;
  Eigen::MatrixXd Q_eta_map;

  Eigen::VectorXd Q_eta(const Eigen::VectorXd& eta) const { return Q_eta_map * eta; }
};

TeamWeights team_weights(const FollowerCost& c);

/// Mode-dependent source terms shared by the follower equations:
///   P:   S        Pi:  S2       K:  S1 (enters with a minus sign)
///   phi: g(t) = S_Gamma1 E[x0](t) + S_eta_map eta(t)
struct CostTerms {
  Eigen::MatrixXd S, S1, S2, S_Gamma1, S_eta_map;
};

CostTerms cost_terms(const Scenario& s);

struct FollowerGains {
  Mode mode = Mode::kTeam;
  GridFunction P;
  GridFunction K;
  GridFunction Pi;
  std::optional<GridFunction> phi;
  GridFunction qii;              // P D at every node
  Eigen::MatrixXd feedback;      // R^{-1} B^T
  double max_symmetrization = 0.0;  // largest per-step correction applied to P or Pi
};

// Each solver integrates its own equation backward from a zero terminal value.
// `symmetrization` (optional) receives the largest per-step correction.
GridFunction solve_P(const Scenario& s, double* symmetrization = nullptr);
GridFunction solve_K(const Scenario& s, const GridFunction& P);
GridFunction solve_Pi(const Scenario& s, double* symmetrization = nullptr);
GridFunction solve_phi(const Scenario& s, const GridFunction& Pi, const GridFunction& mean_x0);

// Validates `s`, then solves P, K and Pi. phi is solved only when `mean_x0` is given.
FollowerGains solve_follower_gains(const Scenario& s,
                                   const GridFunction* mean_x0 = nullptr);

// -R^{-1} B^T (P x + K mean_x + phi) at grid node `k`. The same gains serve
// every follower.
Eigen::VectorXd follower_feedback(const FollowerGains& g, int k, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& mean_x, const Eigen::VectorXd& phi);

}  // namespace stackmf
