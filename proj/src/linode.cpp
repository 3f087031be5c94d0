#include "stackmf/linode.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace stackmf {

BlowUpError::BlowUpError(const std::string& what, double time)
    : std::runtime_error(what), time_(time) {}

namespace {

GridFunction integrate(const MatrixField& rhs, const Eigen::MatrixXd& start, const TimeGrid& grid,
                       const PostStep& post, bool backward) {
  const int steps = grid.steps();
  const double h = backward ? -grid.dt() : grid.dt();
  const double limit = 1e12 * (1.0 + start.norm());
  std::vector<Eigen::MatrixXd> values(grid.nodes());
  int k = backward ? steps : 0;
  values[k] = start;
  Eigen::MatrixXd y = start;

  auto check = [&](const Eigen::MatrixXd& m, double t) {
    if (!m.allFinite() || m.norm() > limit) {
      std::ostringstream msg;
      msg << "integration blew up near t = " << t;
      throw BlowUpError(msg.str(), t);
    }
  };

  for (int step = 0; step < steps; ++step) {
    const double t = grid.node(k);
    const int next = backward ? k - 1 : k + 1;
    const double t_next = grid.node(next);
    const double t_half = 0.5 * (t + t_next);
    const Eigen::MatrixXd k1 = rhs(t, y);
    check(k1, t);
    const Eigen::MatrixXd k2 = rhs(t_half, y + 0.5 * h * k1);
    check(k2, t_half);
    const Eigen::MatrixXd k3 = rhs(t_half, y + 0.5 * h * k2);
    check(k3, t_half);
    const Eigen::MatrixXd k4 = rhs(t_next, y + h * k3);
    check(k4, t_next);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (post) post(y);
    check(y, t_next);
    values[next] = y;
    k = next;
  }
  return GridFunction(grid, std::move(values));
}

}  // namespace

GridFunction integrate_backward(const MatrixField& rhs, const Eigen::MatrixXd& terminal,
                                const TimeGrid& grid, const PostStep& post) {
  return integrate(rhs, terminal, grid, post, true);
}

GridFunction integrate_forward(const MatrixField& rhs, const Eigen::MatrixXd& initial,
                               const TimeGrid& grid, const PostStep& post) {
  return integrate(rhs, initial, grid, post, false);
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix_exponential: not square");
  if (!m.allFinite()) throw std::invalid_argument("matrix_exponential: non-finite input");
  return m.exp();
}

}  // namespace stackmf
