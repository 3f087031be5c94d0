#include "stackmf/equilibrium.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "stackmf/format.hpp"
#include "stackmf/linode.hpp"
#include "stackmf/noise.hpp"

namespace stackmf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<GridFunction> direction_library(const TimeGrid& grid, int m, int count,
                                            uint64_t seed) {
  std::vector<GridFunction> out;
  if (count <= 0) return out;
  out.push_back(GridFunction::Constant(grid, VectorXd::Ones(m)));
  const NoiseSource noise(seed);
  const double T = grid.horizon();
  constexpr int kModes = 3;
  for (int d = 1; d < count; ++d) {
    std::vector<double> coef(m * (2 * kModes + 1));
    noise.init_normals(static_cast<uint32_t>(d), 0xD1EC7u, static_cast<int>(coef.size()),
                       coef.data());
    std::vector<MatrixXd> values(grid.nodes(), MatrixXd::Zero(m, 1));
    for (int k = 0; k < grid.nodes(); ++k) {
      const double t = grid.node(k);
      for (int i = 0; i < m; ++i) {
        const double* c = &coef[i * (2 * kModes + 1)];
        double v = c[0];
        for (int j = 1; j <= kModes; ++j) {
          const double arg = 2.0 * std::numbers::pi * j * t / T;
          v += c[2 * j - 1] * std::cos(arg) + c[2 * j] * std::sin(arg);
        }
        values[k](i, 0) = v;
      }
    }
    double ms = 0.0;
    for (int k = 0; k < grid.nodes(); ++k) {
      const double w = (k == 0 || k == grid.steps()) ? 0.5 : 1.0;
      ms += w * values[k].squaredNorm();
    }
    ms *= grid.dt() / T;
    const double scale = ms > 0.0 ? 1.0 / std::sqrt(ms / m) : 1.0;
    for (auto& v : values) v *= scale;
    out.emplace_back(grid, std::move(values));
  }
  return out;
}

namespace {

MatrixXd columns(const GridFunction& g) {
  MatrixXd out(g.rows(), g.size());
  for (int k = 0; k < g.size(); ++k) out.col(k) = g[k].col(0);
  return out;
}

double trapezoid_weight(const TimeGrid& grid, int k) {
  return (k == 0 || k == grid.steps()) ? 0.5 * grid.dt() : grid.dt();
}

// Deterministic data of one deviation; per path, Delta J(eps) = lin eps + quad eps^2.
struct Plan {
  DeviationTarget target = DeviationTarget::kFollower;
  int direction = 0;
  bool zero = false;
  std::vector<double> eps;
  MatrixXd v;      // m x nodes, the direction
  MatrixXd delta;  // n x nodes, state shift (deviating follower, or each follower)
  MatrixXd w;      // m x nodes, control shift of the deviating follower
  MatrixXd x0s;    // n x nodes, leader state shift
  double quad = 0.0;
  std::vector<double> lin;  // per path
};

Plan follower_plan(const SolvedScenario& sol, const GridFunction& v, int dir,
                   const std::vector<double>& eps) {
  const Scenario& s = sol.scenario;
  const TimeGrid& grid = s.grid;
  const int n = s.dims.n, m = s.dims.m;
  const double N = s.dims.N, dt = grid.dt();
  const auto& fc = s.follower_cost;
  const auto& fg = sol.followers;
  Plan p;
  p.target = DeviationTarget::kFollower;
  p.direction = dir;
  p.eps = eps;
  p.v = columns(v);
  p.zero = p.v.isZero(0.0);
  p.delta = MatrixXd::Zero(n, grid.nodes());
  p.w = MatrixXd::Zero(m, grid.nodes());
  for (int k = 0; k <= grid.steps(); ++k) {
    p.w.col(k) = p.v.col(k) - fg.feedback * (fg.P[k] * p.delta.col(k));
    if (k < grid.steps()) {
      p.delta.col(k + 1) = p.delta.col(k) + (s.follower.A * p.delta.col(k) +
                                             s.follower.B * p.w.col(k)) * dt;
    }
  }
  double quad = 0.0;
  for (int k = 0; k <= grid.steps(); ++k) {
    const VectorXd d = p.delta.col(k);
    const VectorXd gd = fc.Gamma * d / N;
    const VectorXd own = d - gd;
    double q = own.dot(fc.Q * own) + p.w.col(k).dot(fc.R * p.w.col(k));
    if (s.mode == Mode::kTeam) q = (q + (N - 1.0) * gd.dot(fc.Q * gd)) / N;
    quad += 0.5 * trapezoid_weight(grid, k) * q;
  }
  p.quad = quad;
  return p;
}

Plan leader_plan(const SolvedScenario& sol, const GridFunction& v, int dir,
                 const std::vector<double>& eps) {
  const Scenario& s = sol.scenario;
  const TimeGrid& grid = s.grid;
  const int n = s.dims.n;
  const double dt = grid.dt();
  const auto& lc = s.leader_cost;
  const auto& fg = sol.followers;
  const MatrixXd G = s.follower.B * fg.feedback;
  Plan p;
  p.target = DeviationTarget::kLeader;
  p.direction = dir;
  p.eps = eps;
  p.v = columns(v);
  p.zero = p.v.isZero(0.0);

  // Leader state shift along a path (Euler, as simulated) and of its mean (RK4).
  p.x0s = MatrixXd::Zero(n, grid.nodes());
  for (int k = 0; k < grid.steps(); ++k) {
    p.x0s.col(k + 1) = p.x0s.col(k) +
                       (s.leader.A0 * p.x0s.col(k) + s.leader.B0 * p.v.col(k)) * dt;
  }
  const GridFunction mean_shift = integrate_forward(
      [&](double t, const MatrixXd& y) -> MatrixXd {
        return s.leader.A0 * y + s.leader.B0 * v.at(t);
      },
      VectorXd::Zero(n), grid);

  // Followers' reaction: phi and E[x_i] re-solved for the shifted E[x0].
  const GridFunction mean_x0 = sol.mean_x0();
  std::vector<MatrixXd> shifted(grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) shifted[k] = mean_x0[k] + mean_shift[k];
  const GridFunction phi0 = solve_phi(s, fg.Pi, mean_x0);
  const GridFunction phi1 = solve_phi(s, fg.Pi, GridFunction(grid, std::move(shifted)));
  std::vector<MatrixXd> dphi_v(grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) dphi_v[k] = phi1[k] - phi0[k];
  const GridFunction dphi(grid, std::move(dphi_v));
  const GridFunction dm = integrate_forward(
      [&](double t, const MatrixXd& y) -> MatrixXd {
        return (s.follower.A - G * fg.Pi.at(t)) * y - G * dphi.at(t);
      },
      VectorXd::Zero(n), grid);

  p.delta = MatrixXd::Zero(n, grid.nodes());
  for (int k = 0; k < grid.steps(); ++k) {
    const VectorXd d = p.delta.col(k);
    p.delta.col(k + 1) =
        d + ((s.follower.A - G * fg.P[k]) * d - G * (fg.K[k] * dm[k] + dphi[k])) * dt;
  }
  double quad = 0.0;
  for (int k = 0; k <= grid.steps(); ++k) {
    const VectorXd r = p.x0s.col(k) - lc.Gamma0 * p.delta.col(k);
    quad += 0.5 * trapezoid_weight(grid, k) *
            (r.dot(lc.Q0 * r) + p.v.col(k).dot(lc.R0 * p.v.col(k)));
  }
  p.quad = quad;
  return p;
}

// Linear coefficient of Delta J for one simulated path.
double path_linear_term(const Plan& plan, const SolvedScenario& sol, const SimPath& path,
                        int follower, const GridFunction& eta, const GridFunction& eta0) {
  const Scenario& s = sol.scenario;
  const TimeGrid& grid = s.grid;
  const double N = s.dims.N;
  const int n = s.dims.n, m = s.dims.m;
  double lin = 0.0;
  if (plan.target == DeviationTarget::kFollower) {
    const auto& fc = s.follower_cost;
    const MatrixXd I = MatrixXd::Identity(n, n);
    for (int k = 0; k <= grid.steps(); ++k) {
      const VectorXd xi = path.x.col(k).segment(follower * n, n);
      const VectorXd ui = path.u.col(k).segment(follower * m, m);
      const VectorXd target = fc.Gamma * path.xbar.col(k) + fc.Gamma1 * path.x0.col(k) +
                              eta[k].col(0);
      const VectorXd ei = xi - target;
      const VectorXd d = plan.delta.col(k);
      const VectorXd gd = fc.Gamma * d / N;
      double term;
      if (s.mode == Mode::kGame) {
        term = 2.0 * ei.dot(fc.Q * (d - gd)) + 2.0 * ui.dot(fc.R * plan.w.col(k));
      } else {
        const VectorXd sum_e =
            N * ((I - fc.Gamma) * path.xbar.col(k) - fc.Gamma1 * path.x0.col(k) - eta[k].col(0));
        term = (-2.0 * sum_e.dot(fc.Q * gd) + 2.0 * ei.dot(fc.Q * d) +
                2.0 * ui.dot(fc.R * plan.w.col(k))) /
               N;
      }
      lin += 0.5 * trapezoid_weight(grid, k) * term;
    }
  } else {
    const auto& lc = s.leader_cost;
    for (int k = 0; k <= grid.steps(); ++k) {
      const VectorXd e0 = path.x0.col(k) - lc.Gamma0 * path.xbar.col(k) - eta0[k].col(0);
      const VectorXd r = plan.x0s.col(k) - lc.Gamma0 * plan.delta.col(k);
      lin += 0.5 * trapezoid_weight(grid, k) *
             (2.0 * e0.dot(lc.Q0 * r) + 2.0 * path.u0.col(k).dot(lc.R0 * plan.v.col(k)));
    }
  }
  return lin;
}

DeviationResult summarize(const Plan& plan, Mode mode) {
  DeviationResult r;
  r.target = plan.target;
  r.functional = plan.target == DeviationTarget::kLeader ? "J_0"
                 : mode == Mode::kTeam                   ? "J_soc"
                                                         : "J_i";
  r.direction = plan.direction;
  r.zero_direction = plan.zero;
  r.eps = plan.eps;
  const size_t paths = plan.lin.size();
  double s2 = 0, s3 = 0, s4 = 0;
  for (double e : plan.eps) {
    s2 += e * e;
    s3 += e * e * e;
    s4 += e * e * e * e;
  }
  const double det = s2 * s4 - s3 * s3;
  std::vector<std::vector<double>> dj(plan.eps.size(), std::vector<double>(paths));
  std::vector<double> c1(paths), c2(paths);
  for (size_t p = 0; p < paths; ++p) {
    double sy1 = 0, sy2 = 0;
    for (size_t i = 0; i < plan.eps.size(); ++i) {
      const double e = plan.eps[i];
      const double y = plan.lin[p] * e + plan.quad * e * e;
      dj[i][p] = y;
      sy1 += e * y;
      sy2 += e * e * y;
    }
    c1[p] = (s4 * sy1 - s3 * sy2) / det;
    c2[p] = (s2 * sy2 - s3 * sy1) / det;
  }
  for (const auto& d : dj) r.dJ.push_back(estimate(d));
  r.c1 = estimate(c1);
  r.c2 = estimate(c2);
  r.flat = std::abs(r.c1.mean) <= 3.0 * r.c1.se;
  r.convex = r.c2.mean > 0.0;
  r.even = true;
  for (size_t i = 0; i < plan.eps.size(); ++i) {
    for (size_t j = 0; j < plan.eps.size(); ++j) {
      if (plan.eps[j] != -plan.eps[i] || plan.eps[i] <= 0) continue;
      std::vector<double> sum(paths);
      for (size_t p = 0; p < paths; ++p) sum[p] = dj[i][p] + dj[j][p];
      const Estimate e = estimate(sum);
      if (e.mean < -6.0 * e.se) r.even = false;
    }
  }
  if (plan.zero) {
    r.flat = r.convex = r.even = true;
  }
  r.pass = r.flat && r.convex && r.even;
  return r;
}

std::vector<DeviationResult> run_plans(const SolvedScenario& sol, std::vector<Plan>& plans,
                                       const DeviationOptions& opt) {
  const Scenario& s = sol.scenario;
  if (opt.follower < 0 || opt.follower >= s.dims.N) {
    throw std::invalid_argument("deviation test: follower index out of range");
  }
  for (auto& p : plans) p.lin.assign(opt.n_paths, 0.0);
  const GridFunction eta = s.follower_cost.eta.on(s.grid);
  const GridFunction eta0 = s.leader_cost.eta0.on(s.grid);
  SimOptions so;
  so.n_paths = opt.n_paths;
  so.seed = opt.seed;
  so.workers = opt.workers;
  so.observer = [&](int path, const SimPath& sp) {
    for (auto& plan : plans) {
      if (!plan.zero) {
        plan.lin[path] = path_linear_term(plan, sol, sp, opt.follower, eta, eta0);
      }
    }
  };
  simulate(sol, so);
  std::vector<DeviationResult> out;
  for (const auto& plan : plans) out.push_back(summarize(plan, s.mode));
  return out;
}

}  // namespace

DeviationResult follower_deviation_test(const SolvedScenario& sol, const GridFunction& v,
                                        const DeviationOptions& opt, int direction_id) {
  std::vector<Plan> plans{follower_plan(sol, v, direction_id, opt.follower_eps)};
  return run_plans(sol, plans, opt).front();
}

DeviationResult leader_deviation_test(const SolvedScenario& sol, const GridFunction& v,
                                      const DeviationOptions& opt, int direction_id) {
  std::vector<Plan> plans{leader_plan(sol, v, direction_id, opt.leader_eps)};
  return run_plans(sol, plans, opt).front();
}

std::vector<DeviationResult> run_deviation_suite(const SolvedScenario& sol,
                                                 const std::vector<GridFunction>& directions,
                                                 const DeviationOptions& opt) {
  std::vector<Plan> plans;
  for (size_t d = 0; d < directions.size(); ++d) {
    plans.push_back(follower_plan(sol, directions[d], static_cast<int>(d), opt.follower_eps));
  }
  for (size_t d = 0; d < directions.size(); ++d) {
    plans.push_back(leader_plan(sol, directions[d], static_cast<int>(d), opt.leader_eps));
  }
  return run_plans(sol, plans, opt);
}

// ---------------------------------------------------------------------------

double DpOracle::delta() const { return std::max({delta_P, delta_K, delta_phi}); }

DpOracle dp_gain_oracle(const SolvedScenario& sol) {
  const Scenario& s = sol.scenario;
  const TimeGrid& grid = s.grid;
  const int n = s.dims.n, m = s.dims.m, steps = grid.steps();
  const double dt = grid.dt();
  const CostTerms c = cost_terms(s);
  const MatrixXd& R = s.follower_cost.R;

  MatrixXd aug = MatrixXd::Zero(2 * n + m, 2 * n + m);
  aug.block(0, 0, n, n) = s.follower.A;
  aug.block(0, n, n, m) = s.follower.B;
  aug.block(0, n + m, n, n) = MatrixXd::Identity(n, n);
  const MatrixXd E = matrix_exponential(aug * dt);
  const MatrixXd Phi = E.block(0, 0, n, n);
  const MatrixXd Psi = E.block(0, n, n, m);
  const MatrixXd Xi = E.block(0, n + m, n, n);
  const MatrixXd Im = MatrixXd::Identity(m, m);

  const GridFunction mean_x0 = sol.mean_x0();
  std::vector<MatrixXd> P(grid.nodes()), K(grid.nodes()), phi(grid.nodes());
  P[steps] = MatrixXd::Zero(n, n);
  K[steps] = MatrixXd::Zero(n, n);
  phi[steps] = VectorXd::Zero(n);
  for (int k = steps - 1; k >= 0; --k) {
    const MatrixXd& Pn = P[k + 1];
    const MatrixXd& Kn = K[k + 1];
    const VectorXd& phin = phi[k + 1];
    const VectorXd cf = Xi * s.follower.f.at_node(k);
    const VectorXd g = c.S_Gamma1 * mean_x0[k].col(0) + c.S_eta_map * s.follower_cost.eta.at_node(k);
    const MatrixXd H = dt * R + Psi.transpose() * Pn * Psi;
    const auto Hs = H.ldlt();
    const MatrixXd Lx = Hs.solve(Psi.transpose() * Pn * Phi);
    const MatrixXd closed = Phi - Psi * Lx;
    const MatrixXd coupling = Im + Hs.solve(Psi.transpose() * Kn * Psi);
    const MatrixXd Lm = coupling.partialPivLu().solve(Hs.solve(Psi.transpose() * Kn * closed));
    const VectorXd l =
        coupling.partialPivLu().solve(Hs.solve(Psi.transpose() * ((Kn + Pn) * cf + phin)));
    const MatrixXd Mk = closed - Psi * Lm;
    const VectorXd drift = cf - Psi * l;
    P[k] = dt * c.S + dt * Lx.transpose() * R * Lx + closed.transpose() * Pn * closed;
    P[k] = 0.5 * (P[k] + P[k].transpose()).eval();
    K[k] = -dt * c.S1 + dt * Lx.transpose() * R * Lm - closed.transpose() * Pn * Psi * Lm +
           closed.transpose() * Kn * Mk;
    phi[k] = -dt * g + dt * Lx.transpose() * R * l +
             closed.transpose() * (Pn * drift + Kn * drift + phin);
  }
  DpOracle out{GridFunction(grid, std::move(P)), GridFunction(grid, std::move(K)),
               GridFunction(grid, std::move(phi))};
  out.delta_P = max_node_distance(out.P, sol.followers.P);
  out.delta_K = max_node_distance(out.K, sol.followers.K);
  out.delta_phi = max_node_distance(out.phi, sol.phi);
  return out;
}

ResidualReport stationarity_residuals(const EnsembleResult& er, const Scenario& s,
                                      const FollowerGains& fg, const GridFunction& mean_x) {
  ResidualReport rep;
  const int n = s.dims.n, m = s.dims.m;
  const MatrixXd Bt = s.follower.B.transpose();
  const MatrixXd& R = s.follower_cost.R;
  for (const SimPath& p : er.recorded) {
    ++rep.paths;
    for (int k = 0; k < s.grid.nodes(); ++k) {
      const VectorXd common = fg.K[k] * mean_x[k].col(0) + p.phi.col(k);
      for (int j = 0; j < s.dims.N; ++j) {
        const VectorXd costate = fg.P[k] * p.x.col(k).segment(j * n, n) + common;
        const VectorXd r = Bt * costate + R * p.u.col(k).segment(j * m, m);
        rep.max_residual = std::max(rep.max_residual, r.norm());
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> gain_invariants(const SolvedScenario& sol) {
  std::vector<CheckResult> out;
  const Scenario& s = sol.scenario;
  const auto& fg = sol.followers;
  const auto& lg = sol.leader;
  const int last = s.grid.steps();
  const int n = s.dims.n;

  auto add = [&](std::string name, double value, double tol, std::string detail = "") {
    out.push_back(CheckResult{std::move(name), value <= tol, value, tol, std::move(detail)});
  };

  double term = fg.P[last].norm() + fg.K[last].norm() + fg.Pi[last].norm();
  if (fg.phi) term += (*fg.phi)[last].norm();
  add("follower terminal values zero", term, 0.0);

  double pi_max = fg.Pi.max_norm(), sum_gap = 0.0;
  for (int k = 0; k <= last; ++k) {
    sum_gap = std::max(sum_gap, (fg.Pi[k] - fg.P[k] - fg.K[k]).norm());
  }
  add("follower sum identity Pi = P + K", sum_gap, 1e-8 * (1.0 + pi_max));

  const bool sym_source = [&] {
    const MatrixXd S2 = cost_terms(s).S2;
    return (S2 - S2.transpose()).norm() <= 1e-14 * (1.0 + S2.norm());
  }();
  double asym_p = 0.0, asym_pi = 0.0;
  for (int k = 0; k <= last; ++k) {
    asym_p = std::max(asym_p, (fg.P[k] - fg.P[k].transpose()).norm());
    asym_pi = std::max(asym_pi, (fg.Pi[k] - fg.Pi[k].transpose()).norm());
  }
  add("P symmetric", asym_p, 1e-8);
  if (sym_source) {
    add("Pi symmetric", asym_pi, 1e-8);
  } else {
    out.push_back(CheckResult{"Pi symmetric", true, asym_pi, 0.0,
                              "not required: Pi source term is nonsymmetric"});
  }
  add("symmetrization correction per step", fg.max_symmetrization, 1e-10);

  const double lterm =
      lg.calP[last].norm() + lg.calK[last].norm() + lg.calM[last].norm() + lg.calV[last].norm();
  add("leader terminal values zero", lterm, 0.0);

  double m_max = lg.calM.max_norm(), lsum = 0.0, row3 = 0.0, z3 = 0.0;
  for (int k = 0; k <= last; ++k) {
    lsum = std::max(lsum, (lg.calM[k] - lg.calP[k] - lg.calK[k]).norm());
    row3 = std::max(row3, (sol.blocks.e3 * lg.calP[k]).norm());
    z3 = std::max(z3, lg.calZ[k].col(0).segment(2 * n, n).norm());
  }
  add("leader sum identity M = P + K", lsum, 1e-8 * (1.0 + m_max));
  add("leader P third block row zero", row3, 1e-8);
  add("leader Z third block zero", z3, 1e-8);

  const GridFunction phi_direct = solve_phi(s, fg.Pi, sol.mean_x0());
  add("phi cross-check (follower ODE vs leader layer)", max_node_distance(phi_direct, sol.phi),
      1e-6);
  return out;
}

bool VerificationReport::all_pass() const { return failures().empty(); }

std::vector<std::string> VerificationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.pass) out.push_back(c.name);
  }
  for (const auto& d : deviations) {
    if (!d.pass) {
      out.push_back(std::string(d.target == DeviationTarget::kLeader ? "leader" : "follower") +
                    " deviation " + d.functional + " direction " + std::to_string(d.direction));
    }
  }
  return out;
}

void VerificationReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "test,target,functional,direction,eps,c1,c1_se,c2,c2_se,value,tolerance,pass,note\n";
  for (const auto& c : checks) {
    os << "invariant,,,,,,,,," << format_double(c.value) << ',' << format_double(c.tolerance)
       << ',' << (c.pass ? 1 : 0) << ",\"" << c.name;
    if (!c.detail.empty()) os << ": " << c.detail;
    os << "\"\n";
  }
  for (const auto& d : deviations) {
    std::string eps;
    for (size_t i = 0; i < d.eps.size(); ++i) {
      if (i) eps += ';';
      eps += format_double(d.eps[i]);
    }
    os << "deviation," << (d.target == DeviationTarget::kLeader ? "leader" : "follower") << ','
       << d.functional << ',' << d.direction << ',' << eps << ',' << format_double(d.c1.mean)
       << ',' << format_double(d.c1.se) << ',' << format_double(d.c2.mean) << ','
       << format_double(d.c2.se) << ",,," << (d.pass ? 1 : 0) << ','
       << (d.zero_direction ? "zero direction (vacuous)" : "") << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "PASS  " : "FAIL  ") << c.name << "  value=" << c.value
       << " tol=" << c.tolerance;
    if (!c.detail.empty()) os << "  " << c.detail;
    os << '\n';
  }
  for (const auto& d : deviations) {
    os << (d.pass ? "PASS  " : "FAIL  ")
       << (d.target == DeviationTarget::kLeader ? "leader" : "follower") << " deviation "
       << d.functional << " dir " << d.direction;
    if (d.zero_direction) {
      os << "  zero direction (vacuous)\n";
      continue;
    }
    os << "  c1=" << d.c1.mean << " (se " << d.c1.se << ")  c2=" << d.c2.mean << '\n';
  }
  return os.str();
}

}  // namespace stackmf
