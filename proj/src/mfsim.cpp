#include "stackmf/mfsim.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "stackmf/noise.hpp"

namespace stackmf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::MatrixXd SimPath::follower_x(int j) const {
  const int n = static_cast<int>(x0.rows());
  return x.block(j * n, 0, n, x.cols());
}

Eigen::MatrixXd SimPath::follower_u(int j) const {
  const int m = static_cast<int>(u0.rows());
  return u.block(j * m, 0, m, u.cols());
}

Estimate estimate(const std::vector<double>& samples) {
  Estimate e;
  const size_t n = samples.size();
  if (n == 0) return e;
  double sum = 0.0;
  for (double v : samples) sum += v;
  e.mean = sum / n;
  if (n > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / (n - 1) / n);
  }
  return e;
}

namespace {

constexpr int kBlockPaths = 64;

// Per-node sums accumulated by one block of paths.
struct Moments {
  MatrixXd x0, x0sq, xbar, xbarsq, u0, u0sq;
  VectorXd gap;
  MatrixXd Jsum;  // per-follower cost sums and squared sums (N x 2)

  Moments(int n, int m, int nodes, int N)
      : x0(MatrixXd::Zero(n, nodes)),
        x0sq(MatrixXd::Zero(n, nodes)),
        xbar(MatrixXd::Zero(n, nodes)),
        xbarsq(MatrixXd::Zero(n, nodes)),
        u0(MatrixXd::Zero(m, nodes)),
        u0sq(MatrixXd::Zero(m, nodes)),
        gap(VectorXd::Zero(nodes)),
        Jsum(MatrixXd::Zero(N, 2)) {}

  void add(const SimPath& p, const MatrixXd& mean_x) {
    x0 += p.x0;
    x0sq += p.x0.cwiseAbs2();
    xbar += p.xbar;
    xbarsq += p.xbar.cwiseAbs2();
    u0 += p.u0;
    u0sq += p.u0.cwiseAbs2();
    gap += (p.xbar - mean_x).colwise().norm().transpose();
    Jsum.col(0) += p.J;
    Jsum.col(1) += p.J.cwiseAbs2();
  }

  void merge(const Moments& o) {
    x0 += o.x0;
    x0sq += o.x0sq;
    xbar += o.xbar;
    xbarsq += o.xbarsq;
    u0 += o.u0;
    u0sq += o.u0sq;
    gap += o.gap;
    Jsum += o.Jsum;
  }
};

MatrixXd stdev(const MatrixXd& sum, const MatrixXd& sumsq, int n) {
  if (n < 2) return MatrixXd::Zero(sum.rows(), sum.cols());
  MatrixXd mean = sum / n;
  MatrixXd var = (sumsq / n - mean.cwiseAbs2()) * (static_cast<double>(n) / (n - 1));
  return var.cwiseMax(0.0).cwiseSqrt();
}

class PathSimulator {
 public:
  PathSimulator(const SolvedScenario& sol, const SimOptions& opt)
      : sol_(sol),
        opt_(opt),
        s_(sol.scenario),
        noise_(opt.seed),
        f0_(s_.leader.f0.on(s_.grid)),
        f_(s_.follower.f.on(s_.grid)),
        eta0_(s_.leader_cost.eta0.on(s_.grid)),
        eta_(s_.follower_cost.eta.on(s_.grid)) {
    const int nodes = s_.grid.nodes();
    const int n = s_.dims.n;
    mean_x_ = MatrixXd(n, nodes);
    mean_X_ = MatrixXd(3 * n, nodes);
    for (int k = 0; k < nodes; ++k) {
      if (opt.follower_mean) {
        mean_x_.col(k) = (*opt.follower_mean)[k].col(0);
      } else {
        mean_x_.col(k) = sol.mean_state[k].col(0).segment(n, n);
      }
      mean_X_.col(k) = sol.mean_state[k].col(0);
    }
  }

  const MatrixXd& mean_x() const { return mean_x_; }

  void run(int path, SimPath& p) const {
    const int n = s_.dims.n, m = s_.dims.m, N = s_.dims.N;
    const int steps = s_.grid.steps(), nodes = s_.grid.nodes();
    const double dt = s_.grid.dt(), sdt = std::sqrt(dt);
    const auto& fg = sol_.followers;
    const auto& lg = sol_.leader;
    const auto& bs = sol_.blocks;
    const auto& fc = s_.follower_cost;
    const auto& lc = s_.leader_cost;
    const uint32_t pid = static_cast<uint32_t>(path);

    p.x0.resize(n, nodes);
    p.u0.resize(m, nodes);
    p.xbar.resize(n, nodes);
    p.X.resize(3 * n, nodes);
    p.phi.resize(n, nodes);
    p.x.resize(n * N, nodes);
    p.u.resize(m * N, nodes);

    // Noise: row 0 leader, rows 1..N followers.
    dw_.resize(N + 1, steps);
    std::vector<double> buf(steps);
    for (int j = 0; j <= N; ++j) {
      noise_.increments(pid, static_cast<uint32_t>(j), steps, buf.data());
      for (int k = 0; k < steps; ++k) dw_(j, k) = buf[k] * sdt;
    }

    VectorXd x0 = draw_initial(s_.init.leader, noise_, pid, 0);
    MatrixXd xf(n, N);
    for (int j = 0; j < N; ++j) {
      xf.col(j) = draw_initial(s_.init.follower, noise_, pid, static_cast<uint32_t>(j + 1));
    }
    VectorXd X = VectorXd::Zero(3 * n);
    X.segment(0, n) = x0;
    X.segment(n, n) = s_.mean_follower_init();

    const bool offset_all = opt_.follower_offset && opt_.offset_follower < 0;
    const double tw = 0.5 * dt;  // trapezoid end weight
    p.J = VectorXd::Zero(N);
    p.J0 = 0.0;

    MatrixXd uf(m, N);
    for (int k = 0; k <= steps; ++k) {
      const VectorXd meanX = mean_X_.col(k);
      const VectorXd Y = lg.calP[k] * X + lg.calK[k] * meanX + lg.calV[k];
      const VectorXd phi = bs.e3 * Y;
      VectorXd u0;
      if (opt_.leader_control) {
        u0 = opt_.leader_control(k);
      } else {
        u0 = -lg.feedback * (bs.e1 * Y);
        if (opt_.leader_offset) u0 += opt_.leader_offset(k);
      }
      const VectorXd phi_f = opt_.follower_phi ? VectorXd((*opt_.follower_phi)[k].col(0)) : phi;
      uf.noalias() = -fg.feedback * (fg.P[k] * xf);
      uf.colwise() -= fg.feedback * (fg.K[k] * mean_x_.col(k) + phi_f);
      if (opt_.follower_offset) {
        const VectorXd off = opt_.follower_offset(k);
        if (offset_all) {
          uf.colwise() += off;
        } else {
          uf.col(opt_.offset_follower) += off;
        }
      }
      const VectorXd xbar = xf.rowwise().mean();

      if (!x0.allFinite() || !xf.allFinite() || !X.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite state on path " << path << " at node " << k;
        throw SimulationError(msg.str());
      }

      p.x0.col(k) = x0;
      p.u0.col(k) = u0;
      p.xbar.col(k) = xbar;
      p.X.col(k) = X;
      p.phi.col(k) = phi_f;
      p.x.col(k) = Eigen::Map<const VectorXd>(xf.data(), n * N);
      p.u.col(k) = Eigen::Map<const VectorXd>(uf.data(), m * N);

      // Cost integrands.
      const double w = (k == 0 || k == steps) ? tw : dt;
      const VectorXd lead_err = x0 - lc.Gamma0 * xbar - eta0_[k].col(0);
      p.J0 += 0.5 * w * (lead_err.dot(lc.Q0 * lead_err) + u0.dot(lc.R0 * u0));
      MatrixXd err = xf;
      err.colwise() -= fc.Gamma * xbar + fc.Gamma1 * x0 + eta_[k].col(0);
      p.J += 0.5 * w *
             ((err.cwiseProduct(fc.Q * err)).colwise().sum() +
              (uf.cwiseProduct(fc.R * uf)).colwise().sum())
                 .transpose();

      if (k == steps) break;

      // Euler-Maruyama step.
      const double dw0 = dw_(0, k);
      const VectorXd drift_X = bs.calA[k] * X + bs.calB[k] * Y + bs.frakf[k].col(0);
      X += drift_X * dt + bs.calD * dw0;
      x0 += (s_.leader.A0 * x0 + s_.leader.B0 * u0 + f0_[k].col(0)) * dt + s_.leader.D0 * dw0;
      MatrixXd drift_f = s_.follower.A * xf + s_.follower.B * uf;
      drift_f.colwise() += f_[k].col(0);
      xf += drift_f * dt + s_.follower.D * dw_.col(k).segment(1, N).transpose();
    }
    p.Jsoc = p.J.mean();
  }

 private:
  const SolvedScenario& sol_;
  const SimOptions& opt_;
  const Scenario& s_;
  NoiseSource noise_;
  GridFunction f0_, f_, eta0_, eta_;
  MatrixXd mean_x_, mean_X_;
  mutable MatrixXd dw_;
};

}  // namespace

EnsembleResult simulate(const SolvedScenario& sol, const SimOptions& opt) {
  const Scenario& s = sol.scenario;
  if (opt.n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");
  if (!(sol.followers.P.grid() == s.grid) || !(sol.leader.calP.grid() == s.grid)) {
    throw std::invalid_argument("simulate: gains are on a different grid than the scenario");
  }
  if (opt.follower_offset && opt.offset_follower >= s.dims.N) {
    throw std::invalid_argument("simulate: offset_follower out of range");
  }
  const int n = s.dims.n, m = s.dims.m, N = s.dims.N, nodes = s.grid.nodes();
  const int n_blocks = (opt.n_paths + kBlockPaths - 1) / kBlockPaths;
  const int workers = std::max(1, std::min(opt.workers, n_blocks));

  EnsembleResult er;
  er.n_paths = opt.n_paths;
  er.N = N;
  er.grid = s.grid;
  er.J0_paths.assign(opt.n_paths, 0.0);
  er.Jsoc_paths.assign(opt.n_paths, 0.0);
  er.recorded.resize(std::min(opt.record_paths, opt.n_paths));

  std::vector<Moments> block_moments(n_blocks, Moments(n, m, nodes, N));
  std::atomic<int> next_block{0};
  std::vector<std::exception_ptr> errors(workers);

  auto work = [&](int wid) {
    try {
      PathSimulator sim(sol, opt);
      SimPath p;
      for (int b = next_block++; b < n_blocks; b = next_block++) {
        const int first = b * kBlockPaths;
        const int last = std::min(opt.n_paths, first + kBlockPaths);
        for (int path = first; path < last; ++path) {
          sim.run(path, p);
          block_moments[b].add(p, sim.mean_x());
          er.J0_paths[path] = p.J0;
          er.Jsoc_paths[path] = p.Jsoc;
          if (path < static_cast<int>(er.recorded.size())) er.recorded[path] = p;
          if (opt.observer) opt.observer(path, p);
        }
      }
    } catch (...) {
      errors[wid] = std::current_exception();
      next_block = n_blocks;
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Moments total(n, m, nodes, N);
  for (const auto& bm : block_moments) total.merge(bm);
  const int P = opt.n_paths;
  er.mean_x0 = total.x0 / P;
  er.std_x0 = stdev(total.x0, total.x0sq, P);
  er.mean_xbar = total.xbar / P;
  er.std_xbar = stdev(total.xbar, total.xbarsq, P);
  er.mean_u0 = total.u0 / P;
  er.std_u0 = stdev(total.u0, total.u0sq, P);
  er.lln_gap = total.gap / P;
  er.J0 = estimate(er.J0_paths);
  er.Jsoc = estimate(er.Jsoc_paths);
  er.Ji.resize(N);
  for (int j = 0; j < N; ++j) {
    const double mean = total.Jsum(j, 0) / P;
    const double var = P > 1 ? std::max(0.0, (total.Jsum(j, 1) / P - mean * mean) * P / (P - 1))
                             : 0.0;
    er.Ji[j] = Estimate{mean, std::sqrt(var / P)};
  }
  return er;
}

CostTable estimate_costs(const EnsembleResult& er) { return CostTable{er.J0, er.Jsoc, er.Ji}; }

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("loglog_slope: need at least two points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

LlnResult lln_diagnostic(const Scenario& s, const std::vector<int>& N_list, int n_paths,
                         uint64_t seed, int workers) {
  LlnResult out;
  const int mid = s.grid.steps() / 2;
  for (size_t i = 0; i < N_list.size(); ++i) {
    if (i > 0 && N_list[i] <= N_list[i - 1]) {
      throw std::invalid_argument("lln_diagnostic: N_list must be ascending");
    }
    const SolvedScenario sol = solve_all(s.with_N(N_list[i]));
    std::vector<double> gaps(n_paths);
    SimOptions opt;
    opt.n_paths = n_paths;
    opt.seed = seed;
    opt.workers = workers;
    const int n = s.dims.n;
    const VectorXd mean_mid = sol.mean_state[mid].col(0).segment(n, n);
    opt.observer = [&](int path, const SimPath& p) {
      gaps[path] = (p.xbar.col(mid) - mean_mid).norm();
    };
    simulate(sol, opt);
    const Estimate e = estimate(gaps);
    out.rows.push_back(LlnRow{N_list[i], e.mean, e.se});
  }
  if (out.rows.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& r : out.rows) {
      xs.push_back(r.N);
      ys.push_back(r.gap);
    }
    out.slope = loglog_slope(xs, ys);
  }
  return out;
}

}  // namespace stackmf
