#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace stackmf {

/// Uniform partition of [0, T] into `steps` intervals.
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  int nodes() const { return steps_ + 1; }
  double dt() const { return horizon_ / steps_; }
  // Node `steps` is exactly T.
  double node(int k) const { return k == steps_ ? horizon_ : k * dt(); }

  bool operator==(const TimeGrid& other) const {
    return horizon_ == other.horizon_ && steps_ == other.steps_;
  }

 private:
  double horizon_;
  int steps_;
};

/// A matrix- or vector-valued function sampled at every node of a TimeGrid.
/// Vectors are stored as single-column matrices.
class GridFunction {
 public:
  GridFunction(TimeGrid grid, std::vector<Eigen::MatrixXd> values);

  static GridFunction Constant(const TimeGrid& grid, const Eigen::MatrixXd& value);
  static GridFunction Zero(const TimeGrid& grid, int rows, int cols = 1);

  const TimeGrid& grid() const { return grid_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return static_cast<int>(values_.size()); }

  const Eigen::MatrixXd& operator[](int k) const { return values_[k]; }
  Eigen::MatrixXd& operator[](int k) { return values_[k]; }
  const std::vector<Eigen::MatrixXd>& values() const { return values_; }

  // Exact at nodes; cubic Lagrange interpolation on the four surrounding
  // nodes in between (linear when the grid has fewer than four nodes).
  Eigen::MatrixXd at(double t) const;

  bool is_finite() const;
  bool is_constant() const;
  // max over nodes of the Frobenius norm.
  double max_norm() const;

 private:
  TimeGrid grid_;
  int rows_;
  int cols_;
  std::vector<Eigen::MatrixXd> values_;
};

/// max_k ||a_k - b_k||_F. Throws std::invalid_argument on shape or grid mismatch.
double max_node_distance(const GridFunction& a, const GridFunction& b);

/// CSV layout: header `t,<name>_<i>_<j>...` (or `<name>_<i>` for vectors), then
/// one row per node with entries in row-major order.
void write_csv(std::ostream& os, const GridFunction& f, const std::string& name);
void write_csv(const std::string& path, const GridFunction& f, const std::string& name);

/// Reads a file written by write_csv. The grid is recovered from the t column,
/// which must be uniform and start at 0.
GridFunction read_csv(const std::string& path, int rows, int cols);

}  // namespace stackmf
