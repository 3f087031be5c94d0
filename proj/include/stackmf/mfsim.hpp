#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "stackmf/pipeline.hpp"

namespace stackmf {

/// One simulated path. Matrices hold one column per grid node.
struct SimPath {
  Eigen::MatrixXd x0;    // n x nodes, leader state
  Eigen::MatrixXd u0;    // m x nodes
  Eigen::MatrixXd xbar;  // n x nodes, follower average
  Eigen::MatrixXd X;     // 3n x nodes, leader-layer state
  Eigen::MatrixXd phi;   // n x nodes, the phi the followers used
  Eigen::MatrixXd x;     // (n N) x nodes, follower j in rows j n .. j n + n - 1
  Eigen::MatrixXd u;     // (m N) x nodes
  double J0 = 0.0;
  Eigen::VectorXd J;     // per-follower cost
  double Jsoc = 0.0;     // mean of J

  Eigen::MatrixXd follower_x(int j) const;
  Eigen::MatrixXd follower_u(int j) const;
};

// Called once per path, possibly from several threads at once; each call has
// a distinct path index.
using PathObserver = std::function<void(int path, const SimPath& p)>;

struct SimOptions {
  int n_paths = 1000;
  uint64_t seed = 1;
  int workers = 1;
  int record_paths = 0;  // keep full SimPaths for the first paths
  // Replaces the leader's feedback control; the leader state follows the
  // replaced control, the leader layer keeps its own dynamics.
  std::function<Eigen::VectorXd(int k)> leader_control;
  // Added to the leader's feedback control (ignored when leader_control is set).
  std::function<Eigen::VectorXd(int k)> leader_offset;
  // When set, followers use these deterministic paths for phi and E[x_i]
  // instead of the ones carried by the leader layer.
  std::optional<GridFunction> follower_phi;
  std::optional<GridFunction> follower_mean;
  // Added to the feedback control of follower `offset_follower` (0-based),
  // or of every follower when it is negative.
  std::function<Eigen::VectorXd(int k)> follower_offset;
  int offset_follower = -1;
  PathObserver observer;
};

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

Estimate estimate(const std::vector<double>& samples);

struct EnsembleResult {
  int n_paths = 0;
  int N = 0;
  TimeGrid grid{1.0, 2};
  std::vector<double> J0_paths;
  std::vector<double> Jsoc_paths;
  Estimate J0, Jsoc;
  std::vector<Estimate> Ji;
  // Per-node ensemble summaries, one column per node.
  Eigen::MatrixXd mean_x0, std_x0, mean_xbar, std_xbar, mean_u0, std_u0;
  Eigen::VectorXd lln_gap;  // path average of |xbar - E[x_i]| per node
  std::vector<SimPath> recorded;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

EnsembleResult simulate(const SolvedScenario& sol, const SimOptions& opt);

struct CostTable {
  Estimate J0, Jsoc;
  std::vector<Estimate> Ji;
};

CostTable estimate_costs(const EnsembleResult& er);

struct LlnRow {
  int N = 0;
  double gap = 0.0;  // mean gap at t = T/2
  double se = 0.0;
};

struct LlnResult {
  std::vector<LlnRow> rows;
  std::optional<double> slope;  // of log(gap) against log(N); needs >= 2 rows
};

LlnResult lln_diagnostic(const Scenario& s, const std::vector<int>& N_list, int n_paths,
                         uint64_t seed, int workers = 1);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace stackmf
