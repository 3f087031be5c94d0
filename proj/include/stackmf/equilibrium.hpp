#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "stackmf/mfsim.hpp"
#include "stackmf/pipeline.hpp"

namespace stackmf {

/// Deterministic perturbation directions v(t), m-vectors on the grid. Entry 0
/// is v = 1; the rest are random trigonometric polynomials (seeded) scaled to
/// unit mean-square.
std::vector<GridFunction> direction_library(const TimeGrid& grid, int m, int count,
                                            uint64_t seed);

enum class DeviationTarget { kFollower, kLeader };

/// Result of one unilateral deviation test. Per path, Delta J(eps) is fitted
/// by c1 eps + c2 eps^2 (least squares, no intercept); c1 and c2 are averaged
/// over paths with their standard errors.
struct DeviationResult {
  DeviationTarget target = DeviationTarget::kFollower;
  std::string functional;  // "J_i", "J_soc" or "J_0"
  int direction = 0;
  bool zero_direction = false;
  std::vector<double> eps;
  std::vector<Estimate> dJ;  // per eps
  Estimate c1, c2;
  bool flat = false;    // |c1| <= 3 SE
  bool convex = false;  // c2 > 0
  bool even = false;    // dJ(eps) + dJ(-eps) >= -6 SE for every tested pair
  bool pass = false;
};

struct DeviationOptions {
  int n_paths = 10000;
  uint64_t seed = 1;
  int workers = 1;
  int follower = 0;  // tested follower (0-based)
  std::vector<double> follower_eps{-0.2, -0.1, -0.05, 0.05, 0.1, 0.2};
  std::vector<double> leader_eps{-0.2, -0.1, 0.1, 0.2};
};

// Follower i plays feedback + eps v; everyone else and the leader keep their
// strategies. Game mode tests J_i, team mode J_soc.
DeviationResult follower_deviation_test(const SolvedScenario& sol, const GridFunction& v,
                                        const DeviationOptions& opt, int direction_id = 0);

// The leader plays feedback + eps v; the followers react through E[x0] ->
// phi -> E[x_i], recomputed from the deterministic perturbation. Tests J_0.
DeviationResult leader_deviation_test(const SolvedScenario& sol, const GridFunction& v,
                                      const DeviationOptions& opt, int direction_id = 0);

// Runs follower and leader tests for every direction on one shared ensemble.
std::vector<DeviationResult> run_deviation_suite(const SolvedScenario& sol,
                                                 const std::vector<GridFunction>& directions,
                                                 const DeviationOptions& opt);

/// Gains from a discrete-time dynamic program on the same grid: exact one-step
/// transitions of the follower dynamics under piecewise-constant control, left
/// point running costs, the mean state following the equilibrium policy.
struct DpOracle {
  GridFunction P, K, phi;
  double delta_P = 0.0, delta_K = 0.0, delta_phi = 0.0;  // max node distance to the ODE gains
  double delta() const;
};

// Uses sol.phi and the leader-layer E[x0] for the offset source.
DpOracle dp_gain_oracle(const SolvedScenario& sol);

struct ResidualReport {
  double max_residual = 0.0;  // max over recorded paths, followers, nodes of |B^T p + R u|
  int paths = 0;
};

// p = P x_i + K E[x_i] + phi must satisfy B^T p + R u_i = 0 along the recorded
// paths. `mean_x` is E[x_i] on the grid.
ResidualReport stationarity_residuals(const EnsembleResult& er, const Scenario& s,
                                      const FollowerGains& fg, const GridFunction& mean_x);

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  std::vector<DeviationResult> deviations;

  bool all_pass() const;
  std::vector<std::string> failures() const;
  void write_csv(const std::string& path) const;
  std::string summary() const;
};

// Structural invariants of a solved scenario: terminal values, sum identities,
// symmetry, leader third block row, phi cross-check.
std::vector<CheckResult> gain_invariants(const SolvedScenario& sol);

}  // namespace stackmf
