// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "stackmf/equilibrium.hpp"
#include "stackmf/leader_gains.hpp"
#include "stackmf/linode.hpp"
#include "stackmf/mfsim.hpp"
#include "stackmf/pipeline.hpp"

using namespace stackmf;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  const auto start = Clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o = Outcome{false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << title << "  (" << o.detail
            << "; " << std::round(seconds_since(start) * 10) / 10 << " s)" << std::endl;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

GridFunction add(const GridFunction& a, const GridFunction& b) {
  std::vector<MatrixXd> v;
  for (int k = 0; k < a.grid().nodes(); ++k) v.push_back(a[k] + b[k]);
  return GridFunction(a.grid(), v);
}

double scale(const GridFunction& g) { return g.max_norm(); }

double max_asymmetry(const GridFunction& g) {
  double worst = 0.0;
  for (int k = 0; k < g.grid().nodes(); ++k) {
    worst = std::max(worst, (g[k] - g[k].transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

double third_row(const GridFunction& calP, int n) {
  double worst = 0.0;
  for (int k = 0; k < calP.grid().nodes(); ++k) {
    worst = std::max(worst, calP[k].middleRows(2 * n, n).cwiseAbs().maxCoeff());
  }
  return worst;
}

// The scalar team scenario followed by 20 random scenarios with n, m in {1, 2}, alternating
// modes. Draws that fail validation or blow up are replaced and counted.
struct Battery {
  std::vector<SolvedScenario> solved;
  int rejected = 0;
};

const Battery& battery() {
  static const Battery b = [] {
    Battery out;
    out.solved.push_back(solve_all(stackmf::testing::scalar_team()));
    std::mt19937_64 rng(2024);
    int i = 0;
    while (out.solved.size() < 21) {
      const Mode mode = i % 2 ? Mode::kGame : Mode::kTeam;
      const int n = 1 + (i / 2) % 2, m = 1 + (i / 4) % 2;
      const Scenario s = stackmf::testing::random_scenario(rng, mode, n, m);
      try {
        out.solved.push_back(solve_all(s));
        ++i;
      } catch (const BlowUpError&) {
        ++out.rejected;
      } catch (const ValidationError&) {
        ++out.rejected;
      }
    }
    return out;
  }();
  return b;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  std::cout << "acceptance criteria" << std::endl;

  report(1, "scalar team scenario reproduction", [] {
    const Scenario s = stackmf::testing::scalar_team();
    const auto start = Clock::now();
    const SolvedScenario sol = solve_all(s);
    const double secs = seconds_since(start);
    const int T = s.grid.steps();
    bool ok = s.grid.steps() == 1000 && s.grid.horizon() == 10.0 && s.mode == Mode::kTeam;
    for (const GridFunction* g :
         {&sol.followers.P, &sol.followers.K, &sol.followers.Pi, &sol.leader.calP,
          &sol.leader.calK, &sol.leader.calM, &sol.leader.calV}) {
      ok = ok && g->is_finite() && (*g)[T].isZero(0.0);
    }
    ok = ok && secs <= 5.0;
    return Outcome{ok, "all gains finite on [0,10], terminal values exactly 0, solve " +
                           fmt(secs) + " s (limit 5 s)"};
  });

  report(2, "sum identities Pi = P + K and M = P + K", [] {
    const Battery& b = battery();
    double worst_f = 0.0, worst_l = 0.0;
    for (const auto& sol : b.solved) {
      const double df = max_node_distance(sol.followers.Pi, add(sol.followers.P, sol.followers.K));
      const double dl = max_node_distance(sol.leader.calM, add(sol.leader.calP, sol.leader.calK));
      worst_f = std::max(worst_f, df / (1e-8 * (1 + scale(sol.followers.Pi))));
      worst_l = std::max(worst_l, dl / (1e-8 * (1 + scale(sol.leader.calM))));
    }
    return Outcome{worst_f <= 1.0 && worst_l <= 1.0,
                   "worst error / tolerance: follower " + fmt(worst_f) + ", leader " +
                       fmt(worst_l) + " over " + std::to_string(b.solved.size()) +
                       " scenarios (" + std::to_string(b.rejected) + " draws replaced)"};
  });

  report(3, "symmetric Riccati structure", [] {
    double asym = 0.0, row = 0.0;
    for (const auto& sol : battery().solved) {
      asym = std::max({asym, max_asymmetry(sol.followers.P), max_asymmetry(sol.followers.Pi)});
      row = std::max(row, third_row(sol.leader.calP, sol.scenario.dims.n));
    }
    return Outcome{asym <= 1e-8 && row <= 1e-8,
                   "max asymmetry of P, Pi " + fmt(asym) + ", leader P third block row " +
                       fmt(row)};
  });

  report(4, "closed-form oracles", [] {
    Scenario s = stackmf::testing::simple_scenario(Mode::kGame, 1, 1, 5, 1.0, 1000);
    s.follower.A.setZero();
    s.follower_cost.Gamma.setZero();
    const double p0 = solve_P(s)[0](0, 0);
    const bool tanh_ok = std::abs(p0 - 0.761594) <= 1e-6;

    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
      const int n = 1 + rep % 2, d = 3 * n;
      BlockSystem::At b;
      b.A = stackmf::testing::uniform_matrix(rng, d, d, -0.5, 0.5);
      b.B = stackmf::testing::uniform_matrix(rng, d, d, -0.5, 0.5);
      b.A1 = stackmf::testing::uniform_matrix(rng, d, d, -0.5, 0.5);
      b.B1 = stackmf::testing::uniform_matrix(rng, d, d, -0.5, 0.5);
      b.A2 = b.B2 = MatrixXd::Zero(d, d);
      b.f = b.f1 = VectorXd::Zero(d);
      const BlockSystem bs = constant_blocks(TimeGrid(1.5, 1000), n, b, VectorXd::Zero(d));
      worst = std::max(worst, max_node_distance(solve_leader_P(bs),
                                                leader_P_expm_oracle(bs, FlowVariant::kB1)));
    }
    return Outcome{tanh_ok && worst <= 1e-8, "tanh P(0) = " + std::to_string(p0) +
                                                 ", leader ODE vs expm flow max diff " +
                                                 fmt(worst) + " over 6 instances"};
  });

  report(5, "mode coincidence at Gamma = 0", [] {
    std::mt19937_64 rng(55);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      const Scenario game = stackmf::testing::random_scenario(rng, Mode::kGame, 1 + i % 2,
                                                              1 + (i / 2) % 2, true);
      Scenario team = game;
      team.mode = Mode::kTeam;
      const SolvedScenario a = solve_all(game), b = solve_all(team);
      worst = std::max({worst, max_node_distance(a.followers.P, b.followers.P),
                        max_node_distance(a.followers.K, b.followers.K),
                        max_node_distance(a.followers.Pi, b.followers.Pi),
                        max_node_distance(a.phi, b.phi),
                        max_node_distance(a.leader.calP, b.leader.calP),
                        max_node_distance(a.leader.calM, b.leader.calM),
                        max_node_distance(a.leader.calV, b.leader.calV)});
    }
    return Outcome{worst <= 1e-9, "max node-wise difference " + fmt(worst) + " on 10 scenarios"};
  });

  report(6, "equilibrium certification on the scalar team scenario", [] {
    const SolvedScenario sol = solve_all(stackmf::testing::scalar_team());
    DeviationOptions opt;
    opt.n_paths = 10000;
    opt.seed = 1;
    const auto dirs = direction_library(sol.scenario.grid, sol.scenario.dims.m, 5, opt.seed);
    const auto start = Clock::now();
    const auto results = run_deviation_suite(sol, dirs, opt);
    const double secs = seconds_since(start);
    bool ok = results.size() == 10;
    double worst_z = 0.0, min_c2 = INFINITY;
    for (const auto& r : results) {
      ok = ok && r.pass && std::abs(r.c1.mean) <= 3 * r.c1.se && r.c2.mean > 0;
      worst_z = std::max(worst_z, std::abs(r.c1.mean) / r.c1.se);
      min_c2 = std::min(min_c2, r.c2.mean);
    }
    ok = ok && secs <= 600.0;
    return Outcome{ok, "10^4 paths, 5 directions, follower J_soc and leader J_0: max |c1|/SE " +
                           fmt(worst_z) + ", min c2 " + fmt(min_c2) + ", " + fmt(secs) +
                           " s on one core"};
  });

  report(7, "law of large numbers rate", [] {
    const LlnResult r =
        lln_diagnostic(stackmf::testing::scalar_team(), {30, 120, 480}, 400, 3);
    std::string gaps;
    for (const auto& row : r.rows) gaps += " " + fmt(row.gap);
    const double slope = r.slope.value_or(NAN);
    return Outcome{std::abs(slope + 0.5) <= 0.15,
                   "slope " + fmt(slope) + " (target -0.5 +- 0.15), gaps at T/2:" + gaps};
  });

  report(8, "discrete dynamic programming convergence", [] {
    const Scenario s = stackmf::testing::scalar_team();
    std::vector<double> dts, deltas;
    std::string detail;
    for (int steps : {500, 1000, 2000, 4000}) {
      const DpOracle dp = dp_gain_oracle(solve_all(s.with_steps(steps)));
      dts.push_back(s.grid.horizon() / steps);
      deltas.push_back(dp.delta());
      detail += " " + fmt(dp.delta());
    }
    const double rate = loglog_slope(dts, deltas);
    return Outcome{std::abs(rate - 1.0) <= 0.3,
                   "rate " + fmt(rate) + " (target 1 +- 0.3), deltas:" + detail};
  });

  report(9, "determinism across worker counts", [] {
    const fs::path root = fs::temp_directory_path() / "stackmf_acceptance_det";
    fs::remove_all(root);
    fs::create_directories(root);
    auto run = [&](const std::string& out, int workers) {
      const std::string cmd = std::string("\"") + STACKMF_CLI_PATH + "\" simulate --config \"" +
                              stackmf::testing::scenario_path("scalar_team.yaml") + "\" --out \"" +
                              (root / out).string() + "\" --paths 256 --seed 9 --dump-paths 3" +
                              " --workers " + std::to_string(workers) + " > /dev/null";
      return std::system(cmd.c_str());
    };
    if (run("w1", 1) != 0 || run("w2", 2) != 0) return Outcome{false, "simulate failed"};
    int files = 0;
    bool same = true;
    for (const auto& e : fs::directory_iterator(root / "w1")) {
      ++files;
      same = same && slurp(e.path()) == slurp(root / "w2" / e.path().filename());
    }
    fs::remove_all(root);
    return Outcome{same && files >= 4, std::to_string(files) +
                                           " output files byte-identical for --workers 1 and 2"};
  });

  report(10, "trivial-case battery", [] {
    std::string detail;
    bool ok = true;
    {
      Scenario s = stackmf::testing::scalar_team();
      s.follower_cost.Q.setZero();
      const SolvedScenario sol = solve_all(s);
      bool zero = sol.followers.P.max_norm() == 0 && sol.followers.K.max_norm() == 0 &&
                  sol.followers.Pi.max_norm() == 0 && sol.phi.max_norm() == 0;
      SimOptions so;
      so.n_paths = 50;
      double umax = 0.0;
      so.observer = [&](int, const SimPath& p) { umax = std::max(umax, p.u.cwiseAbs().maxCoeff()); };
      simulate(sol, so);
      zero = zero && umax == 0.0;
      ok = ok && zero;
      detail += std::string("Q = 0: gains and controls ") + (zero ? "zero" : "NOT zero");
    }
    {
      Scenario s = stackmf::testing::scalar_team();
      s.leader_cost.Q0.setZero();
      SimOptions so;
      so.n_paths = 1000;
      double umax = 0.0;
      so.observer = [&](int, const SimPath& p) {
        umax = std::max(umax, p.u0.colwise().norm().maxCoeff());
      };
      simulate(solve_all(s), so);
      ok = ok && umax <= 1e-6;
      detail += ", Q0 = 0: max |u0| " + fmt(umax) + " over 10^3 paths";
    }
    {
      Scenario s = stackmf::testing::scalar_team();
      s.mode = Mode::kGame;
      s.dims.N = 1;
      const double kmax = solve_all(s).followers.K.max_norm();
      ok = ok && kmax == 0.0;
      detail += ", N = 1 game: max |K| " + fmt(kmax);
    }
    return Outcome{ok, detail};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
