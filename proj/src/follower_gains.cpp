#include "stackmf/follower_gains.hpp"

#include <algorithm>

#include "stackmf/linode.hpp"

namespace stackmf {

TeamWeights team_weights(const FollowerCost& c) {
  const Eigen::MatrixXd& Q = c.Q;
  const Eigen::MatrixXd& G = c.Gamma;
  TeamWeights w;
  w.Q_Gamma = G.transpose() * Q + Q * G - G.transpose() * Q * G;
  w.Q_Gamma1 = Q * c.Gamma1 - G.transpose() * Q * c.Gamma1;
  w.Q_eta_map = Q - G.transpose() * Q;
  return w;
}

CostTerms cost_terms(const Scenario& s) {
  const int n = s.dims.n;
  const double N = s.dims.N;
  const auto& c = s.follower_cost;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  CostTerms t;
  if (s.mode == Mode::kGame) {
    const Eigen::MatrixXd L = (I - c.Gamma / N).transpose() * c.Q;
    t.S = L * (I - c.Gamma / N);
    t.S1 = ((N - 1.0) / N) * L * c.Gamma;
    t.S2 = L * (I - c.Gamma);
    t.S_Gamma1 = L * c.Gamma1;
    t.S_eta_map = L;
  } else {
    const TeamWeights w = team_weights(c);
    t.S = c.Q - w.Q_Gamma / N;
    t.S1 = ((N - 1.0) / N) * w.Q_Gamma;
    t.S2 = c.Q - w.Q_Gamma;
    t.S_Gamma1 = w.Q_Gamma1;
    t.S_eta_map = w.Q_eta_map;
  }
  return t;
}

namespace {

Eigen::MatrixXd control_weight(const Scenario& s) {
  const auto& B = s.follower.B;
  return B * s.follower_cost.R.ldlt().solve(B.transpose());
}

bool symmetric(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).norm() <= 1e-14 * (1.0 + m.norm());
}

// Symmetric Riccati  X' + A^T X + X A - X G X + W = 0,  X(T) = 0.
GridFunction solve_riccati(const Scenario& s, const Eigen::MatrixXd& W, double* symmetrization) {
  const Eigen::MatrixXd& A = s.follower.A;
  const Eigen::MatrixXd G = control_weight(s);
  const int n = s.dims.n;
  double worst = 0.0;
  PostStep post;
  if (symmetric(W)) {
    post = [&worst](Eigen::MatrixXd& X) {
      const Eigen::MatrixXd skew = 0.5 * (X - X.transpose());
      worst = std::max(worst, skew.norm());
      X -= skew;
    };
  }
  GridFunction out = integrate_backward(
      [&](double, const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
        return -(A.transpose() * X + X * A - X * G * X + W);
      },
      Eigen::MatrixXd::Zero(n, n), s.grid, post);
  if (symmetrization) *symmetrization = worst;
  return out;
}

}  // namespace

GridFunction solve_P(const Scenario& s, double* symmetrization) {
  return solve_riccati(s, cost_terms(s).S, symmetrization);
}

GridFunction solve_Pi(const Scenario& s, double* symmetrization) {
  return solve_riccati(s, cost_terms(s).S2, symmetrization);
}

GridFunction solve_K(const Scenario& s, const GridFunction& P) {
  if (!(P.grid() == s.grid)) throw std::invalid_argument("solve_K: P is on a different grid");
  const Eigen::MatrixXd& A = s.follower.A;
  const Eigen::MatrixXd G = control_weight(s);
  const Eigen::MatrixXd S1 = cost_terms(s).S1;
  const int n = s.dims.n;
  return integrate_backward(
      [&](double t, const Eigen::MatrixXd& K) -> Eigen::MatrixXd {
        const Eigen::MatrixXd Pt = P.at(t);
        return -(A.transpose() * K + K * A - Pt * G * K - K * G * (Pt + K) - S1);
      },
      Eigen::MatrixXd::Zero(n, n), s.grid);
}

GridFunction solve_phi(const Scenario& s, const GridFunction& Pi, const GridFunction& mean_x0) {
  if (!(Pi.grid() == s.grid) || !(mean_x0.grid() == s.grid)) {
    throw std::invalid_argument("solve_phi: inputs are on a different grid");
  }
  const Eigen::MatrixXd& A = s.follower.A;
  const Eigen::MatrixXd G = control_weight(s);
  const CostTerms c = cost_terms(s);
  const GridFunction f = s.follower.f.on(s.grid);
  const GridFunction eta = s.follower_cost.eta.on(s.grid);
  const bool constant_f = f.is_constant();
  const bool constant_eta = eta.is_constant();
  return integrate_backward(
      [&](double t, const Eigen::MatrixXd& phi) -> Eigen::MatrixXd {
        const Eigen::MatrixXd Pit = Pi.at(t);
        const Eigen::MatrixXd ft = constant_f ? f[0] : f.at(t);
        const Eigen::MatrixXd etat = constant_eta ? eta[0] : eta.at(t);
        const Eigen::MatrixXd g = c.S_Gamma1 * mean_x0.at(t) + c.S_eta_map * etat;
        return -((A.transpose() - Pit * G) * phi + Pit * ft - g);
      },
      Eigen::VectorXd::Zero(s.dims.n), s.grid);
}

FollowerGains solve_follower_gains(const Scenario& s, const GridFunction* mean_x0) {
  require_valid(s);
  double sym_p = 0.0, sym_pi = 0.0;
  GridFunction P = solve_P(s, &sym_p);
  GridFunction K = solve_K(s, P);
  GridFunction Pi = solve_Pi(s, &sym_pi);
  std::vector<Eigen::MatrixXd> qii;
  qii.reserve(s.grid.nodes());
  for (int k = 0; k < s.grid.nodes(); ++k) qii.emplace_back(P[k] * s.follower.D);
  std::optional<GridFunction> phi;
  if (mean_x0) phi = solve_phi(s, Pi, *mean_x0);
  return FollowerGains{s.mode,
                       std::move(P),
                       std::move(K),
                       std::move(Pi),
                       std::move(phi),
                       GridFunction(s.grid, std::move(qii)),
                       s.follower_cost.R.ldlt().solve(s.follower.B.transpose()),
                       std::max(sym_p, sym_pi)};
}

Eigen::VectorXd follower_feedback(const FollowerGains& g, int k, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& mean_x, const Eigen::VectorXd& phi) {
  return -g.feedback * (g.P[k] * x + g.K[k] * mean_x + phi);
}

}  // namespace stackmf
