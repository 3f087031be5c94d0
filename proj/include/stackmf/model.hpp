#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "stackmf/grid_function.hpp"

namespace stackmf {

enum class Mode { kGame, kTeam };

const char* mode_name(Mode mode);

struct Dims {
  int n = 1;  // state dimension
  int m = 1;  // control dimension
  int N = 1;  // follower count
};

/// A vector signal given either as one constant value or as samples at the
/// first grid nodes, held constant after the last sample.
struct Signal {
  std::vector<Eigen::VectorXd> samples;

  static Signal Constant(const Eigen::VectorXd& v) { return Signal{{v}}; }
  bool is_constant() const { return samples.size() == 1; }
  const Eigen::VectorXd& at_node(int k) const;
  GridFunction on(const TimeGrid& grid) const;
};

struct LeaderDynamics {
  Eigen::MatrixXd A0, B0;
  Signal f0;
  Eigen::VectorXd D0;
};

struct FollowerDynamics {
  Eigen::MatrixXd A, B;
  Signal f;
  Eigen::VectorXd D;
};

struct LeaderCost {
  Eigen::MatrixXd Q0, R0, Gamma0;
  Signal eta0;
};

struct FollowerCost {
  Eigen::MatrixXd Q, R, Gamma, Gamma1;
  Signal eta;
};

/// Per-coordinate independent law. Fields `a`, `b` hold (value, unused) for
/// constant, (low, high) for uniform and (mean, variance) for gaussian.
struct Distribution {
  enum class Kind { kConstant, kUniform, kGaussian };
  Kind kind = Kind::kConstant;
  Eigen::VectorXd a, b;

  Eigen::VectorXd mean() const;
  Eigen::VectorXd variance() const;
};

struct InitialLaw {
  Distribution leader;
  Distribution follower;
};

struct Scenario {
  Mode mode = Mode::kTeam;
  Dims dims;
  LeaderDynamics leader;
  FollowerDynamics follower;
  LeaderCost leader_cost;
  FollowerCost follower_cost;
  InitialLaw init;
  TimeGrid grid{1.0, 2};

  Eigen::VectorXd mean_leader_init() const { return init.leader.mean(); }
  Eigen::VectorXd mean_follower_init() const { return init.follower.mean(); }

  Scenario with_steps(int steps) const;
  Scenario with_N(int N) const;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownKeyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ParseError, DimensionError, UnknownKeyError, or std::invalid_argument
// for semantically bad values (e.g. steps < 2).
Scenario load_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);

// Text that load_scenario maps back to a bitwise-identical Scenario.
std::string serialize_scenario(const Scenario& s);

// Bitwise equality of every field.
bool identical(const Scenario& a, const Scenario& b);

struct ValidationCheck {
  std::string name;
  bool passed = true;
  bool hard = true;  // hard failures block the solvers; soft ones are warnings
  double value = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const;  // all hard checks pass
  const ValidationCheck* find(const std::string& name) const;
  std::vector<std::string> hard_failures() const;
  std::vector<std::string> warnings() const;
  std::string to_text() const;
};

ValidationReport validate(const Scenario& s);

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ValidationError naming the failed hard checks.
void require_valid(const Scenario& s);

// Positive-definiteness tolerance: min eig > 1e-10 (1 + max eig).
bool is_positive_definite(const Eigen::MatrixXd& m);
bool is_positive_semidefinite(const Eigen::MatrixXd& m);

}  // namespace stackmf
