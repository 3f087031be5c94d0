#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

#include "stackmf/grid_function.hpp"

namespace stackmf {

/// Raised when an integrated trajectory leaves the finite range. `time()` is
/// the node time at which the growth was detected.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double time);
  double time() const { return time_; }

 private:
  double time_;
};

using MatrixField = std::function<Eigen::MatrixXd(double t, const Eigen::MatrixXd& m)>;
// Applied to the state after each completed step (e.g. symmetrization).
using PostStep = std::function<void(Eigen::MatrixXd& m)>;

// Classical RK4 from t = T down to 0. Node `steps` holds `terminal` exactly.
GridFunction integrate_backward(const MatrixField& rhs, const Eigen::MatrixXd& terminal,
                                const TimeGrid& grid, const PostStep& post = {});

// Classical RK4 from t = 0 up to T. Node 0 holds `initial` exactly.
GridFunction integrate_forward(const MatrixField& rhs, const Eigen::MatrixXd& initial,
                               const TimeGrid& grid, const PostStep& post = {});

// Scaling and squaring with a Pade core. Throws std::invalid_argument on
// non-finite or non-square input.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m);

}  // namespace stackmf
