#include "stackmf/grid_function.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stackmf/format.hpp"

namespace stackmf {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("time grid: horizon must be positive and finite");
  }
  if (steps < 2) throw std::invalid_argument("time grid: steps must be >= 2");
}

GridFunction::GridFunction(TimeGrid grid, std::vector<Eigen::MatrixXd> values)
    : grid_(grid), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != grid_.nodes()) {
    throw std::invalid_argument("grid function: expected one value per node");
  }
  rows_ = static_cast<int>(values_.front().rows());
  cols_ = static_cast<int>(values_.front().cols());
  for (const auto& v : values_) {
    if (v.rows() != rows_ || v.cols() != cols_) {
      throw std::invalid_argument("grid function: inconsistent value shapes");
    }
  }
}

GridFunction GridFunction::Constant(const TimeGrid& grid, const Eigen::MatrixXd& value) {
  return GridFunction(grid, std::vector<Eigen::MatrixXd>(grid.nodes(), value));
}

GridFunction GridFunction::Zero(const TimeGrid& grid, int rows, int cols) {
  return Constant(grid, Eigen::MatrixXd::Zero(rows, cols));
}

Eigen::MatrixXd GridFunction::at(double t) const {
  const int steps = grid_.steps();
  const double h = grid_.dt();
  const double s = std::clamp(t / h, 0.0, static_cast<double>(steps));
  const int k = std::min(static_cast<int>(std::floor(s)), steps - 1);
  const double frac = s - k;
  if (frac == 0.0) return values_[k];
  if (s == steps) return values_[steps];
  if (steps < 3) {
    return (1.0 - frac) * values_[k] + frac * values_[k + 1];
  }
  // Four-point stencil starting at `first`, shifted inward at the ends.
  const int first = std::clamp(k - 1, 0, steps - 3);
  const double x = s - first;  // position in stencil coordinates 0..3
  double w[4];
  for (int a = 0; a < 4; ++a) {
    double num = 1.0, den = 1.0;
    for (int b = 0; b < 4; ++b) {
      if (b == a) continue;
      num *= x - b;
      den *= a - b;
    }
    w[a] = num / den;
  }
  Eigen::MatrixXd out = w[0] * values_[first];
  for (int a = 1; a < 4; ++a) out += w[a] * values_[first + a];
  return out;
}

bool GridFunction::is_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](const Eigen::MatrixXd& v) { return v.allFinite(); });
}

bool GridFunction::is_constant() const {
  for (const auto& v : values_) {
    if (!(v.array() == values_.front().array()).all()) return false;
  }
  return true;
}

double GridFunction::max_norm() const {
  double out = 0.0;
  for (const auto& v : values_) out = std::max(out, v.norm());
  return out;
}

double max_node_distance(const GridFunction& a, const GridFunction& b) {
  if (!(a.grid() == b.grid()) || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_node_distance: grid or shape mismatch");
  }
  double out = 0.0;
  for (int k = 0; k < a.size(); ++k) out = std::max(out, (a[k] - b[k]).norm());
  return out;
}

void write_csv(std::ostream& os, const GridFunction& f, const std::string& name) {
  os << "t";
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < f.cols(); ++j) {
      os << ',' << name << '_' << i;
      if (f.cols() > 1) os << '_' << j;
    }
  }
  os << '\n';
  for (int k = 0; k < f.size(); ++k) {
    os << format_double(f.grid().node(k));
    for (int i = 0; i < f.rows(); ++i) {
      for (int j = 0; j < f.cols(); ++j) os << ',' << format_double(f[k](i, j));
    }
    os << '\n';
  }
}

void write_csv(const std::string& path, const GridFunction& f, const std::string& name) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(os, f, name);
  if (!os) throw std::runtime_error("write failed: " + path);
}

GridFunction read_csv(const std::string& path, int rows, int cols) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) fields.push_back(parse_double(cell));
    if (static_cast<int>(fields.size()) != 1 + rows * cols) {
      throw std::runtime_error(path + ": wrong column count");
    }
    times.push_back(fields[0]);
    Eigen::MatrixXd v(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) v(i, j) = fields[1 + i * cols + j];
    }
    values.push_back(std::move(v));
  }
  if (times.size() < 3 || times.front() != 0.0) {
    throw std::runtime_error(path + ": time column must start at 0 with >= 3 nodes");
  }
  TimeGrid grid(times.back(), static_cast<int>(times.size()) - 1);
  for (size_t k = 0; k < times.size(); ++k) {
    if (std::abs(times[k] - grid.node(static_cast<int>(k))) > 1e-9 * (1.0 + grid.horizon())) {
      throw std::runtime_error(path + ": time column is not uniform");
    }
  }
  return GridFunction(grid, std::move(values));
}

}  // namespace stackmf
