#include "stackmf/leader_gains.hpp"

#include <cmath>
#include <sstream>

#include "stackmf/linode.hpp"

namespace stackmf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

BlockSystem::At BlockSystem::at(double t) const {
  return At{calA.at(t),  calB.at(t),  calA1.at(t), calB1.at(t),
            calA2.at(t), calB2.at(t), frakf.at(t), frakf1.at(t)};
}

BlockSystem::At BlockSystem::node(int k) const {
  return At{calA[k], calB[k], calA1[k], calB1[k], calA2[k], calB2[k], frakf[k], frakf1[k]};
}

namespace {

bool block_zero(const MatrixXd& m, int n, int bi, int bj) {
  return m.block(bi * n, bj * n, n, n).isZero(0.0);
}

// Every block outside `allowed` (row-major 3x3 mask) must be exactly zero.
void require_pattern(const GridFunction& g, int n, const char* name, const bool allowed[9]) {
  for (int k = 0; k < g.size(); ++k) {
    for (int b = 0; b < 9; ++b) {
      if (!allowed[b] && !block_zero(g[k], n, b / 3, b % 3)) {
        std::ostringstream msg;
        msg << "block system: " << name << " has a nonzero block (" << b / 3 + 1 << ","
            << b % 3 + 1 << ")";
        throw std::logic_error(msg.str());
      }
    }
  }
}

}  // namespace

BlockSystem assemble_blocks(const Scenario& s, const FollowerGains& fg) {
  const int n = s.dims.n;
  const TimeGrid& grid = s.grid;
  if (!(fg.P.grid() == grid)) throw std::invalid_argument("assemble_blocks: grid mismatch");
  const auto& lc = s.leader_cost;
  const MatrixXd G = s.follower.B * s.follower_cost.R.ldlt().solve(s.follower.B.transpose());
  const MatrixXd G0 = s.leader.B0 * lc.R0.ldlt().solve(s.leader.B0.transpose());
  const CostTerms c = cost_terms(s);
  const MatrixXd& A0 = s.leader.A0;
  const MatrixXd& A = s.follower.A;

  MatrixXd A1 = MatrixXd::Zero(3 * n, 3 * n);
  A1.block(0, 0, n, n) = -lc.Q0;
  A1.block(0, n, n, n) = lc.Q0 * lc.Gamma0;
  A1.block(n, 0, n, n) = lc.Gamma0.transpose() * lc.Q0;
  A1.block(n, n, n, n) = -lc.Gamma0.transpose() * lc.Q0 * lc.Gamma0;

  MatrixXd A2 = MatrixXd::Zero(3 * n, 3 * n);
  A2.block(0, 2 * n, n, n) = -c.S_Gamma1.transpose();
  A2.block(2 * n, 0, n, n) = c.S_Gamma1;

  MatrixXd B = MatrixXd::Zero(3 * n, 3 * n);
  B.block(0, 0, n, n) = -G0;
  B.block(n, 2 * n, n, n) = -G;
  B.block(2 * n, n, n, n) = G;

  std::vector<MatrixXd> vA, vB1, vB2, vf, vf1;
  for (int k = 0; k < grid.nodes(); ++k) {
    const MatrixXd& P = fg.P[k];
    const MatrixXd& Pi = fg.Pi[k];
    const VectorXd& f0 = s.leader.f0.at_node(k);
    const VectorXd& f = s.follower.f.at_node(k);
    const VectorXd& eta0 = lc.eta0.at_node(k);
    const VectorXd& eta = s.follower_cost.eta.at_node(k);

    MatrixXd a = MatrixXd::Zero(3 * n, 3 * n);
    a.block(0, 0, n, n) = A0;
    a.block(n, n, n, n) = A - G * Pi;
    a.block(2 * n, 2 * n, n, n) = A - G * Pi.transpose();
    vA.push_back(std::move(a));

    MatrixXd b1 = MatrixXd::Zero(3 * n, 3 * n);
    b1.block(0, 0, n, n) = -A0.transpose();
    b1.block(n, n, n, n) = -(A - G * P).transpose();
    b1.block(2 * n, 2 * n, n, n) = -(A.transpose() - Pi * G);
    vB1.push_back(std::move(b1));

    MatrixXd b2 = MatrixXd::Zero(3 * n, 3 * n);
    b2.block(n, n, n, n) = (Pi - P).transpose() * G;
    vB2.push_back(std::move(b2));

    VectorXd ff = VectorXd::Zero(3 * n);
    ff.segment(0, n) = f0;
    ff.segment(n, n) = f;
    vf.push_back(std::move(ff));

    VectorXd ff1(3 * n);
    ff1.segment(0, n) = lc.Q0 * eta0;
    ff1.segment(n, n) = -lc.Gamma0.transpose() * lc.Q0 * eta0;
    ff1.segment(2 * n, n) = c.S_eta_map * eta - Pi * f;
    vf1.push_back(std::move(ff1));
  }

  VectorXd D = VectorXd::Zero(3 * n);
  D.segment(0, n) = s.leader.D0;
  MatrixXd e1 = MatrixXd::Zero(n, 3 * n), e3 = MatrixXd::Zero(n, 3 * n);
  e1.block(0, 0, n, n).setIdentity();
  e3.block(0, 2 * n, n, n).setIdentity();

  BlockSystem bs{n,
                 GridFunction(grid, std::move(vA)),
                 GridFunction::Constant(grid, B),
                 GridFunction::Constant(grid, A1),
                 GridFunction(grid, std::move(vB1)),
                 GridFunction::Constant(grid, A2),
                 GridFunction(grid, std::move(vB2)),
                 GridFunction(grid, std::move(vf)),
                 GridFunction(grid, std::move(vf1)),
                 D,
                 e1,
                 e3};

  static const bool kDiag[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  static const bool kB[9] = {1, 0, 0, 0, 0, 1, 0, 1, 0};
  static const bool kA1[9] = {1, 1, 0, 1, 1, 0, 0, 0, 0};
  static const bool kA2[9] = {0, 0, 1, 0, 0, 0, 1, 0, 0};
  static const bool kB2[9] = {0, 0, 0, 0, 1, 0, 0, 0, 0};
  require_pattern(bs.calA, n, "A", kDiag);
  require_pattern(bs.calB, n, "B", kB);
  require_pattern(bs.calA1, n, "A1", kA1);
  require_pattern(bs.calB1, n, "B1", kDiag);
  require_pattern(bs.calA2, n, "A2", kA2);
  require_pattern(bs.calB2, n, "B2", kB2);
  if (!bs.calD.segment(n, 2 * n).isZero(0.0)) {
    throw std::logic_error("block system: D must vanish outside the leader block");
  }
  return bs;
}

BlockSystem constant_blocks(const TimeGrid& grid, int n, const BlockSystem::At& b,
                            const VectorXd& calD) {
  MatrixXd e1 = MatrixXd::Zero(n, 3 * n), e3 = MatrixXd::Zero(n, 3 * n);
  e1.block(0, 0, n, n).setIdentity();
  e3.block(0, 2 * n, n, n).setIdentity();
  return BlockSystem{n,
                     GridFunction::Constant(grid, b.A),
                     GridFunction::Constant(grid, b.B),
                     GridFunction::Constant(grid, b.A1),
                     GridFunction::Constant(grid, b.B1),
                     GridFunction::Constant(grid, b.A2),
                     GridFunction::Constant(grid, b.B2),
                     GridFunction::Constant(grid, b.f),
                     GridFunction::Constant(grid, b.f1),
                     calD,
                     e1,
                     e3};
}

GridFunction solve_leader_P(const BlockSystem& bs) {
  const int d = 3 * bs.n;
  return integrate_backward(
      [&](double t, const MatrixXd& P) -> MatrixXd {
        const BlockSystem::At b = bs.at(t);
        return -(P * b.A + P * b.B * P - b.A1 - b.B1 * P);
      },
      MatrixXd::Zero(d, d), bs.grid());
}

GridFunction solve_leader_K(const BlockSystem& bs, const GridFunction& calP) {
  const int d = 3 * bs.n;
  return integrate_backward(
      [&](double t, const MatrixXd& K) -> MatrixXd {
        const BlockSystem::At b = bs.at(t);
        const MatrixXd P = calP.at(t);
        const MatrixXd M = P + K;
        return -(P * b.B * K + K * b.A + K * b.B * M - b.B1 * K - b.A2 - b.B2 * M);
      },
      MatrixXd::Zero(d, d), bs.grid());
}

GridFunction solve_leader_M(const BlockSystem& bs) {
  const int d = 3 * bs.n;
  return integrate_backward(
      [&](double t, const MatrixXd& M) -> MatrixXd {
        const BlockSystem::At b = bs.at(t);
        return -(M * b.A + M * b.B * M - b.B1 * M - b.A1 - b.A2 - b.B2 * M);
      },
      MatrixXd::Zero(d, d), bs.grid());
}

GridFunction solve_leader_V(const BlockSystem& bs, const GridFunction& calM) {
  const int d = 3 * bs.n;
  return integrate_backward(
      [&](double t, const MatrixXd& V) -> MatrixXd {
        const BlockSystem::At b = bs.at(t);
        const MatrixXd M = calM.at(t);
        return -(M * b.B * V + M * b.f - b.B1 * V - b.B2 * V - b.f1);
      },
      VectorXd::Zero(d), bs.grid());
}

LeaderGains solve_leader_gains(const Scenario& s, const BlockSystem& bs) {
  GridFunction P = solve_leader_P(bs);
  GridFunction K = solve_leader_K(bs, P);
  GridFunction M = solve_leader_M(bs);
  GridFunction V = solve_leader_V(bs, M);
  std::vector<MatrixXd> z;
  z.reserve(P.size());
  for (int k = 0; k < P.size(); ++k) z.emplace_back(P[k] * bs.calD);
  return LeaderGains{std::move(P), std::move(K), std::move(M), std::move(V),
                     GridFunction(bs.grid(), std::move(z)),
                     s.leader_cost.R0.ldlt().solve(s.leader.B0.transpose())};
}

GridFunction leader_P_expm_oracle(const BlockSystem& bs, FlowVariant variant) {
  for (const GridFunction* g : {&bs.calA, &bs.calB, &bs.calA1, &bs.calB1, &bs.calB2}) {
    if (!g->is_constant()) {
      throw std::invalid_argument("leader_P_expm_oracle: blocks must be constant in time");
    }
  }
  const int d = 3 * bs.n;
  const TimeGrid& grid = bs.grid();
  MatrixXd H(2 * d, 2 * d);
  H << bs.calA[0], bs.calB[0], bs.calA1[0],
      (variant == FlowVariant::kB1 ? bs.calB1[0] : bs.calB2[0]);
  std::vector<MatrixXd> values(grid.nodes());
  double prev_det = 1.0;
  for (int k = grid.steps(); k >= 0; --k) {
    const double t = grid.node(k);
    const MatrixXd flow = matrix_exponential(H * (t - grid.horizon()));
    const MatrixXd U = flow.block(0, 0, d, d);
    const MatrixXd V = flow.block(d, 0, d, d);
    Eigen::PartialPivLU<MatrixXd> lu(U.transpose());
    const double det = lu.determinant();
    if (lu.rcond() < 1e-12 || !std::isfinite(det) || (det > 0) != (prev_det > 0)) {
      std::ostringstream msg;
      msg << "Hamiltonian flow: U(t) is singular near t = " << t;
      throw SingularFlowError(msg.str(), t);
    }
    prev_det = det;
    values[k] = lu.solve(V.transpose().eval()).transpose();  // (U^-T V^T)^T = V U^-1
  }
  return GridFunction(grid, std::move(values));
}

GridFunction solve_mean_state(const BlockSystem& bs, const LeaderGains& lg,
                              const VectorXd& mean_x0_init, const VectorXd& mean_x_init) {
  const int n = bs.n;
  VectorXd x0 = VectorXd::Zero(3 * n);
  x0.segment(0, n) = mean_x0_init;
  x0.segment(n, n) = mean_x_init;
  return integrate_forward(
      [&](double t, const MatrixXd& X) -> MatrixXd {
        const BlockSystem::At b = bs.at(t);
        return (b.A + b.B * lg.calM.at(t)) * X + b.B * lg.calV.at(t) + b.f;
      },
      x0, bs.grid());
}

GridFunction reconstruct_phi(const BlockSystem& bs, const LeaderGains& lg,
                             const GridFunction& mean_state) {
  std::vector<MatrixXd> phi;
  phi.reserve(mean_state.size());
  for (int k = 0; k < mean_state.size(); ++k) {
    phi.emplace_back(bs.e3 * (lg.calM[k] * mean_state[k] + lg.calV[k]));
  }
  return GridFunction(mean_state.grid(), std::move(phi));
}

VectorXd leader_feedback(const LeaderGains& lg, const BlockSystem& bs, int k, const VectorXd& X,
                         const VectorXd& meanX) {
  return -lg.feedback * (bs.e1 * (lg.calP[k] * X + lg.calK[k] * meanX + lg.calV[k]));
}

}  // namespace stackmf
