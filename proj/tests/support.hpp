#pragma once

// Scenario builders shared by the unit tests and the acceptance binary.

#include <Eigen/Dense>

#include <random>
#include <string>

#include "stackmf/model.hpp"

namespace stackmf::testing {

inline std::string scenario_path(const std::string& name) {
  return std::string(STACKMF_SCENARIO_DIR) + "/" + name;
}

inline Scenario scalar_team() { return load_scenario_file(scenario_path("scalar_team.yaml")); }

inline Eigen::VectorXd vec(int n, double v) { return Eigen::VectorXd::Constant(n, v); }

// Identity-like scenario with constant initial states.
inline Scenario simple_scenario(Mode mode, int n, int m, int N, double T, int steps) {
  Scenario s;
  s.mode = mode;
  s.dims = Dims{n, m, N};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Bnm = Eigen::MatrixXd::Identity(n, m);
  s.leader = LeaderDynamics{0.1 * I, Bnm, Signal::Constant(vec(n, 0.5)), vec(n, 0.3)};
  s.follower = FollowerDynamics{-0.1 * I, Bnm, Signal::Constant(vec(n, 0.2)), vec(n, 0.4)};
  s.leader_cost = LeaderCost{I, Eigen::MatrixXd::Identity(m, m), 0.5 * I,
                             Signal::Constant(vec(n, 0.1))};
  s.follower_cost = FollowerCost{I, Eigen::MatrixXd::Identity(m, m), 0.5 * I, 0.3 * I,
                                 Signal::Constant(vec(n, 0.2))};
  s.init.leader = Distribution{Distribution::Kind::kConstant, vec(n, 1.0), vec(n, 0.0)};
  s.init.follower = Distribution{Distribution::Kind::kConstant, vec(n, 2.0), vec(n, 0.0)};
  s.grid = TimeGrid(T, steps);
  return s;
}

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, int r, int c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

inline Eigen::MatrixXd spd(std::mt19937_64& rng, int n, double floor) {
  const Eigen::MatrixXd L = uniform_matrix(rng, n, n, -1.0, 1.0);
  return L * L.transpose() + floor * Eigen::MatrixXd::Identity(n, n);
}

// Random scenario with moderate coefficients on [0, T]. Gamma is gamma I in
// game mode and a full random matrix in team mode, unless `gamma_zero`.
inline Scenario random_scenario(std::mt19937_64& rng, Mode mode, int n, int m,
                                bool gamma_zero = false, double T = 2.0, int steps = 400) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario s = simple_scenario(mode, n, m, 10 + static_cast<int>(40 * u(rng)), T, steps);
  s.leader.A0 = uniform_matrix(rng, n, n, -0.5, 0.5);
  s.leader.B0 = uniform_matrix(rng, n, m, -1.0, 1.0);
  s.leader.f0 = Signal::Constant(uniform_matrix(rng, n, 1, -1.0, 1.0));
  s.leader.D0 = uniform_matrix(rng, n, 1, 0.1, 0.5);
  s.follower.A = uniform_matrix(rng, n, n, -0.5, 0.5);
  s.follower.B = uniform_matrix(rng, n, m, -1.0, 1.0);
  s.follower.f = Signal::Constant(uniform_matrix(rng, n, 1, -1.0, 1.0));
  s.follower.D = uniform_matrix(rng, n, 1, 0.1, 0.5);
  s.leader_cost.Q0 = spd(rng, n, 0.1);
  s.leader_cost.R0 = spd(rng, m, 0.5);
  s.leader_cost.Gamma0 = uniform_matrix(rng, n, n, -0.8, 0.8);
  s.leader_cost.eta0 = Signal::Constant(uniform_matrix(rng, n, 1, -1.0, 1.0));
  s.follower_cost.Q = spd(rng, n, 0.1);
  s.follower_cost.R = spd(rng, m, 0.5);
  if (gamma_zero) {
    s.follower_cost.Gamma = Eigen::MatrixXd::Zero(n, n);
  } else if (mode == Mode::kGame) {
    s.follower_cost.Gamma = (0.9 * u(rng)) * Eigen::MatrixXd::Identity(n, n);
  } else {
    s.follower_cost.Gamma = uniform_matrix(rng, n, n, -0.6, 0.6);
  }
  s.follower_cost.Gamma1 = uniform_matrix(rng, n, n, -0.5, 0.5);
  s.follower_cost.eta = Signal::Constant(uniform_matrix(rng, n, 1, -1.0, 1.0));
  s.init.leader = Distribution{Distribution::Kind::kGaussian, uniform_matrix(rng, n, 1, -1, 1),
                               vec(n, 0.25)};
  s.init.follower = Distribution{Distribution::Kind::kUniform, vec(n, -1.0), vec(n, 2.0)};
  return s;
}

}  // namespace stackmf::testing
