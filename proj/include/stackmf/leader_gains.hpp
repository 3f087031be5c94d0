#pragma once

#include <Eigen/Dense>

#include <stdexcept>

#include "stackmf/follower_gains.hpp"
#include "stackmf/grid_function.hpp"
#include "stackmf/model.hpp"

namespace stackmf {

/// The leader's 3n-dimensional forward-backward system
///   dX = [A X + B Y + f] dt + D dW0
///   dY = [A1 X + B1 Y + A2 E[X] + B2 E[Y] + f1] dt + Z dW0,   Y(T) = 0
/// with X = (leader state, mean follower state, adjoint of phi) and
/// Y = (leader costate, costate of the mean follower state, phi).
/// Blocks that depend on the follower gains are sampled on the grid.
struct BlockSystem {
  int n = 1;
  GridFunction calA, calB, calA1, calB1, calA2, calB2;
  GridFunction frakf, frakf1;
  Eigen::VectorXd calD;
  Eigen::MatrixXd e1, e3;  // n x 3n selectors of the first and third block

  struct At {
    Eigen::MatrixXd A, B, A1, B1, A2, B2;
    Eigen::VectorXd f, f1;
  };
  At at(double t) const;
  At node(int k) const;
  const TimeGrid& grid() const { return calA.grid(); }
};

// Throws std::logic_error if a block violates its sparsity pattern.
BlockSystem assemble_blocks(const Scenario& s, const FollowerGains& fg);

// Blocks that are constant in time (for oracle checks on synthetic instances).
BlockSystem constant_blocks(const TimeGrid& grid, int n, const BlockSystem::At& b,
                            const Eigen::VectorXd& calD);

struct LeaderGains {
  GridFunction calP, calK, calM, calV, calZ;
  Eigen::MatrixXd feedback;  // R0^{-1} B0^T
};

GridFunction solve_leader_P(const BlockSystem& bs);
// K is integrated with M replaced by P + K, so it does not depend on solve_leader_M.
GridFunction solve_leader_K(const BlockSystem& bs, const GridFunction& calP);
GridFunction solve_leader_M(const BlockSystem& bs);
GridFunction solve_leader_V(const BlockSystem& bs, const GridFunction& calM);

LeaderGains solve_leader_gains(const Scenario& s, const BlockSystem& bs);

class SingularFlowError : public std::runtime_error {
 public:
  SingularFlowError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

// Which block sits in the lower-right corner of the Hamiltonian matrix.
// kB1 reproduces the solve_leader_P equation; kB2 is the alternative printed form.
enum class FlowVariant { kB1, kB2 };

// P(t) = V(t) U(t)^{-1}, [U; V](t) = exp(H (t - T)) [I; 0], H = [[A, B], [A1, B1 or B2]].
// Requires constant blocks; throws SingularFlowError when U(t) is singular.
GridFunction leader_P_expm_oracle(const BlockSystem& bs, FlowVariant variant = FlowVariant::kB1);

// Mean of X under the closed loop: forward RK4 of
// dE[X] = [(A + B M) E[X] + B V + f] dt, E[X](0) = (mean leader init, mean follower init, 0).
GridFunction solve_mean_state(const BlockSystem& bs, const LeaderGains& lg,
                              const Eigen::VectorXd& mean_x0_init,
                              const Eigen::VectorXd& mean_x_init);

// phi = e3 (M E[X] + V), the deterministic third block of E[Y].
GridFunction reconstruct_phi(const BlockSystem& bs, const LeaderGains& lg,
                             const GridFunction& mean_state);

// -R0^{-1} B0^T e1 (P X + K E[X] + V) at node k.
Eigen::VectorXd leader_feedback(const LeaderGains& lg, const BlockSystem& bs, int k,
                                const Eigen::VectorXd& X, const Eigen::VectorXd& meanX);

}  // namespace stackmf
