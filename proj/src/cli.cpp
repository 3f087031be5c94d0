#include "stackmf/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stackmf/equilibrium.hpp"
#include "stackmf/format.hpp"
#include "stackmf/linode.hpp"
#include "stackmf/mfsim.hpp"
#include "stackmf/model.hpp"
#include "stackmf/pipeline.hpp"

namespace stackmf {

namespace fs = std::filesystem;

std::string fnv1a_hex(const std::string& text) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

constexpr const char* kVersion = "0.1.0";

class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

Scenario load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CliError(kExitIo, "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return load_scenario(ss.str());
  } catch (const std::exception& e) {
    throw CliError(kExitValidation, path + ": " + e.what());
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw CliError(kExitIo, "cannot create directory " + dir);
}

std::string join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw CliError(kExitIo, "cannot write " + path);
  os << text;
  if (!os) throw CliError(kExitIo, "write failed: " + path);
}

void write_gf(const std::string& dir, const std::string& file, const GridFunction& g,
              const std::string& name, std::vector<std::string>& files) {
  try {
    write_csv(join(dir, file), g, name);
  } catch (const std::runtime_error& e) {
    throw CliError(kExitIo, e.what());
  }
  files.push_back(file);
}

void write_manifest(const std::string& dir, const std::string& command, const Scenario& s,
                    nlohmann::ordered_json params, std::vector<std::string> files) {
  nlohmann::ordered_json j;
  j["tool"] = "stackmf";
  j["version"] = kVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  j["command"] = command;
  j["scenario_hash"] = fnv1a_hex(serialize_scenario(s));
  j["mode"] = mode_name(s.mode);
  j["grid"] = {{"T", s.grid.horizon()}, {"steps", s.grid.steps()}};
  j["N"] = s.dims.N;
  j["parameters"] = std::move(params);
  files.push_back("manifest.json");
  j["files"] = files;
  write_text(join(dir, "manifest.json"), j.dump(2) + "\n");
}

// Writes validation.txt; throws CliError(2) naming the failed hard checks.
void check_valid(const Scenario& s, const std::string& dir, std::vector<std::string>& files,
                 std::ostream& err) {
  const ValidationReport rep = validate(s);
  write_text(join(dir, "validation.txt"), rep.to_text());
  files.push_back("validation.txt");
  for (const auto& w : rep.warnings()) err << "warning: " << w << "\n";
  if (!rep.ok()) {
    std::string msg = "validation failed:";
    for (const auto& f : rep.hard_failures()) msg += " [" + f + "]";
    throw CliError(kExitValidation, msg);
  }
}

template <typename F>
auto guard_blowup(const std::string& dir, F&& f) {
  try {
    return f();
  } catch (const BlowUpError& e) {
    std::ostringstream msg;
    msg << "Riccati integration blew up going backward from T, failure time t = " << e.time();
    std::ofstream os(join(dir, "validation.txt"), std::ios::app);
    os << "FAIL  Riccati existence on [0,T]  (" << msg.str() << ")\n";
    throw CliError(kExitBlowUp, msg.str());
  }
}

FollowerGains load_follower_gains(const Scenario& s, const std::string& dir) {
  const int n = s.dims.n;
  auto read = [&](const std::string& file) {
    try {
      return read_csv(join(dir, file), n, n);
    } catch (const std::exception& e) {
      throw CliError(kExitIo, e.what());
    }
  };
  GridFunction P = read("P.csv"), K = read("K.csv"), Pi = read("Pi.csv");
  for (const GridFunction* g : {&P, &K, &Pi}) {
    if (!(g->grid().steps() == s.grid.steps()) ||
        std::abs(g->grid().horizon() - s.grid.horizon()) > 1e-9 * s.grid.horizon()) {
      throw CliError(kExitGridMismatch, "gains in " + dir + " are on a different grid than the " +
                                            "config (steps " +
                                            std::to_string(g->grid().steps()) + " vs " +
                                            std::to_string(s.grid.steps()) + ")");
    }
  }
  auto regrid = [&](const GridFunction& g) { return GridFunction(s.grid, g.values()); };
  std::vector<Eigen::MatrixXd> qii;
  for (int k = 0; k < s.grid.nodes(); ++k) qii.emplace_back(P[k] * s.follower.D);
  return FollowerGains{s.mode,
                       regrid(P),
                       regrid(K),
                       regrid(Pi),
                       std::nullopt,
                       GridFunction(s.grid, std::move(qii)),
                       s.follower_cost.R.ldlt().solve(s.follower.B.transpose()),
                       0.0};
}

SolvedScenario solve_scenario(const Scenario& s, const std::string& gains_dir,
                              const std::string& out_dir) {
  return guard_blowup(out_dir, [&] {
    if (gains_dir.empty()) return solve_all(s);
    return solve_from_follower_gains(s, load_follower_gains(s, gains_dir));
  });
}

std::vector<std::string> write_gains(const SolvedScenario& sol, const std::string& dir) {
  std::vector<std::string> files;
  write_gf(dir, "P.csv", sol.followers.P, "P", files);
  write_gf(dir, "K.csv", sol.followers.K, "K", files);
  write_gf(dir, "Pi.csv", sol.followers.Pi, "Pi", files);
  write_gf(dir, "phi.csv", sol.phi, "phi", files);
  write_gf(dir, "qii.csv", sol.followers.qii, "qii", files);
  write_gf(dir, "leaderP.csv", sol.leader.calP, "leaderP", files);
  write_gf(dir, "leaderK.csv", sol.leader.calK, "leaderK", files);
  write_gf(dir, "leaderM.csv", sol.leader.calM, "leaderM", files);
  write_gf(dir, "leaderV.csv", sol.leader.calV, "leaderV", files);
  write_gf(dir, "leaderZ.csv", sol.leader.calZ, "leaderZ", files);
  write_gf(dir, "mean_state.csv", sol.mean_state, "EX", files);
  return files;
}

std::string vec_columns(const std::string& name, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += "," + name + (n > 1 ? "_" + std::to_string(i) : "");
  return out;
}

void write_columns(std::ostream& os, const Eigen::MatrixXd& m, int k) {
  for (int i = 0; i < m.rows(); ++i) os << ',' << format_double(m(i, k));
}

std::vector<std::string> write_ensemble(const SolvedScenario& sol, const EnsembleResult& er,
                                        const std::string& dir) {
  const Scenario& s = sol.scenario;
  const int n = s.dims.n, m = s.dims.m;
  std::vector<std::string> files;

  std::ostringstream sum;
  sum << "t" << vec_columns("mean_x0", n) << vec_columns("std_x0", n)
      << vec_columns("mean_xbar", n) << vec_columns("std_xbar", n) << vec_columns("mean_u0", m)
      << vec_columns("std_u0", m) << vec_columns("E_x", n) << ",lln_gap\n";
  for (int k = 0; k < s.grid.nodes(); ++k) {
    sum << format_double(s.grid.node(k));
    write_columns(sum, er.mean_x0, k);
    write_columns(sum, er.std_x0, k);
    write_columns(sum, er.mean_xbar, k);
    write_columns(sum, er.std_xbar, k);
    write_columns(sum, er.mean_u0, k);
    write_columns(sum, er.std_u0, k);
    for (int i = 0; i < n; ++i) sum << ',' << format_double(sol.mean_state[k](n + i, 0));
    sum << ',' << format_double(er.lln_gap(k)) << '\n';
  }
  write_text(join(dir, "summary.csv"), sum.str());
  files.push_back("summary.csv");

  std::ostringstream costs;
  costs << "quantity,mean,se\n";
  costs << "J0," << format_double(er.J0.mean) << ',' << format_double(er.J0.se) << '\n';
  costs << "Jsoc," << format_double(er.Jsoc.mean) << ',' << format_double(er.Jsoc.se) << '\n';
  for (size_t j = 0; j < er.Ji.size(); ++j) {
    costs << "J_" << j + 1 << ',' << format_double(er.Ji[j].mean) << ','
          << format_double(er.Ji[j].se) << '\n';
  }
  write_text(join(dir, "costs.csv"), costs.str());
  files.push_back("costs.csv");

  if (!er.recorded.empty()) {
    std::ostringstream tr;
    tr << "path,t" << vec_columns("x0", n);
    for (int j = 1; j <= s.dims.N; ++j) tr << vec_columns("x" + std::to_string(j), n);
    tr << '\n';
    for (size_t p = 0; p < er.recorded.size(); ++p) {
      const SimPath& sp = er.recorded[p];
      for (int k = 0; k < s.grid.nodes(); ++k) {
        tr << p << ',' << format_double(s.grid.node(k));
        write_columns(tr, sp.x0, k);
        write_columns(tr, sp.x, k);
        tr << '\n';
      }
    }
    write_text(join(dir, "trajectories.csv"), tr.str());
    files.push_back("trajectories.csv");
  }
  return files;
}

// ---------------------------------------------------------------------------

struct Options {
  std::string config, out = "out", gains;
  int paths = 1000;
  uint64_t seed = 1;
  int workers = 1;
  int dump_paths = 1;
  int directions = 5;
  std::string vary, values;
};

int cmd_solve(const Options& o, std::ostream& out, std::ostream& err) {
  const Scenario s = load(o.config);
  ensure_dir(o.out);
  std::vector<std::string> files;
  check_valid(s, o.out, files, err);
  const SolvedScenario sol = solve_scenario(s, "", o.out);
  for (auto& f : write_gains(sol, o.out)) files.push_back(f);
  write_manifest(o.out, "solve", s, nlohmann::ordered_json::object(), files);
  out << "solved " << mode_name(s.mode) << " scenario, " << s.grid.nodes() << " nodes -> "
      << o.out << "\n";
  return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.paths < 1) throw CliError(kExitUsage, "--paths must be >= 1");
  const Scenario s = load(o.config);
  ensure_dir(o.out);
  std::vector<std::string> files;
  check_valid(s, o.out, files, err);
  const SolvedScenario sol = solve_scenario(s, o.gains, o.out);
  SimOptions so;
  so.n_paths = o.paths;
  so.seed = o.seed;
  so.workers = o.workers;
  so.record_paths = std::max(0, o.dump_paths);
  const EnsembleResult er = simulate(sol, so);
  for (auto& f : write_ensemble(sol, er, o.out)) files.push_back(f);
  nlohmann::ordered_json params = {{"paths", o.paths},
                                   {"seed", o.seed},
                                   {"dump_paths", so.record_paths},
                                   {"gains", o.gains.empty() ? "solved" : "loaded"}};
  write_manifest(o.out, "simulate", s, params, files);
  out << "J0 = " << er.J0.mean << " (se " << er.J0.se << "), Jsoc = " << er.Jsoc.mean << " (se "
      << er.Jsoc.se << ")\n";
  return kExitOk;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.paths < 2) throw CliError(kExitUsage, "--paths must be >= 2");
  if (o.directions < 0) throw CliError(kExitUsage, "--directions must be >= 0");
  const Scenario s = load(o.config);
  ensure_dir(o.out);
  std::vector<std::string> files;
  check_valid(s, o.out, files, err);
  const SolvedScenario sol = solve_scenario(s, o.gains, o.out);

  VerificationReport rep;
  rep.checks = gain_invariants(sol);

  SimOptions so;
  so.n_paths = std::min(o.paths, 4);
  so.seed = o.seed;
  so.record_paths = so.n_paths;
  const EnsembleResult er = simulate(sol, so);
  const ResidualReport rr = stationarity_residuals(er, s, sol.followers, sol.mean_x());
  rep.checks.push_back(
      CheckResult{"stationarity residual B^T p + R u", rr.max_residual <= 1e-10,
                  rr.max_residual, 1e-10, ""});

  std::vector<GridFunction> dirs;
  if (o.directions == 0) {
    dirs.push_back(GridFunction::Zero(s.grid, s.dims.m));
  } else {
    dirs = direction_library(s.grid, s.dims.m, o.directions, o.seed);
  }
  DeviationOptions dopt;
  dopt.n_paths = o.paths;
  dopt.seed = o.seed;
  dopt.workers = o.workers;
  rep.deviations = run_deviation_suite(sol, dirs, dopt);

  rep.write_csv(join(o.out, "verification.csv"));
  files.push_back("verification.csv");
  write_text(join(o.out, "verification.txt"), rep.summary());
  files.push_back("verification.txt");
  nlohmann::ordered_json params = {{"paths", o.paths},
                                   {"seed", o.seed},
                                   {"directions", o.directions},
                                   {"gains", o.gains.empty() ? "solved" : "loaded"}};
  write_manifest(o.out, "verify", s, params, files);
  out << rep.summary();
  if (o.directions == 0) out << "note: zero direction only, deviation tests pass vacuously\n";
  if (!rep.all_pass()) {
    std::string msg = "verification failed:";
    for (const auto& f : rep.failures()) msg += " [" + f + "]";
    throw CliError(kExitVerification, msg);
  }
  return kExitOk;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(parse_double(cell));
    } catch (const std::invalid_argument&) {
      throw CliError(kExitUsage, "--values: bad number '" + cell + "'");
    }
  }
  if (out.empty()) throw CliError(kExitUsage, "--values must not be empty");
  return out;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.vary != "N" && o.vary != "Gamma" && o.vary != "steps") {
    throw CliError(kExitUsage, "--vary must be N, Gamma or steps");
  }
  if (o.paths < 1) throw CliError(kExitUsage, "--paths must be >= 1");
  const std::vector<double> values = parse_values(o.values);
  const Scenario base = load(o.config);
  ensure_dir(o.out);

  struct Row {
    double value;
    Estimate J0, Jsoc, gap;
  };
  std::vector<Row> rows;
  std::vector<std::string> files;
  for (double value : values) {
    Scenario s = base;
    if (o.vary == "N" || o.vary == "steps") {
      if (value != std::floor(value) || value < 1) {
        throw CliError(kExitUsage, "--values must be positive integers for " + o.vary);
      }
      try {
        s = o.vary == "N" ? base.with_N(static_cast<int>(value))
                          : base.with_steps(static_cast<int>(value));
      } catch (const std::invalid_argument& e) {
        throw CliError(kExitUsage, e.what());
      }
    } else {
      s.follower_cost.Gamma = value * Eigen::MatrixXd::Identity(s.dims.n, s.dims.n);
    }
    const std::string sub = o.vary + "_" + format_double(value);
    const std::string dir = join(o.out, sub);
    ensure_dir(dir);
    std::vector<std::string> sub_files;
    check_valid(s, dir, sub_files, err);
    const SolvedScenario sol = solve_scenario(s, "", dir);
    for (auto& f : write_gains(sol, dir)) sub_files.push_back(f);

    const int mid = s.grid.steps() / 2;
    const int n = s.dims.n;
    const Eigen::VectorXd mean_mid = sol.mean_state[mid].col(0).segment(n, n);
    std::vector<double> gaps(o.paths);
    SimOptions so;
    so.n_paths = o.paths;
    so.seed = o.seed;
    so.workers = o.workers;
    so.observer = [&](int path, const SimPath& p) {
      gaps[path] = (p.xbar.col(mid) - mean_mid).norm();
    };
    const EnsembleResult er = simulate(sol, so);
    for (auto& f : write_ensemble(sol, er, dir)) sub_files.push_back(f);
    write_manifest(dir, "sweep-run", s, {{"paths", o.paths}, {"seed", o.seed}}, sub_files);
    rows.push_back(Row{value, er.J0, er.Jsoc, estimate(gaps)});
    files.push_back(sub + "/");
  }

  std::ostringstream agg;
  agg << o.vary << ",J0,J0_se,Jsoc,Jsoc_se,lln_gap_mid,lln_gap_mid_se\n";
  for (const auto& r : rows) {
    agg << format_double(r.value) << ',' << format_double(r.J0.mean) << ','
        << format_double(r.J0.se) << ',' << format_double(r.Jsoc.mean) << ','
        << format_double(r.Jsoc.se) << ',' << format_double(r.gap.mean) << ','
        << format_double(r.gap.se) << '\n';
  }
  write_text(join(o.out, "aggregate.csv"), agg.str());
  files.push_back("aggregate.csv");

  std::ostringstream fit;
  bool have_fit = false;
  fit << "quantity,value\n";
  if (o.vary == "N" && rows.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      xs.push_back(r.value);
      ys.push_back(r.gap.mean);
    }
    const double slope = loglog_slope(xs, ys);
    fit << "loglog_slope_lln_gap_vs_N," << format_double(slope) << '\n';
    out << "fitted slope of log(gap) vs log(N): " << slope << "\n";
    have_fit = true;
  } else if (o.vary == "steps" && rows.size() >= 3) {
    // Weak error against the finest grid, fitted in dt = T / steps.
    size_t finest = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].value > rows[finest].value) finest = i;
    }
    std::vector<double> xs, ys;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (i == finest) continue;
      const double diff = std::abs(rows[i].J0.mean - rows[finest].J0.mean);
      if (diff > 0.0) {
        xs.push_back(base.grid.horizon() / rows[i].value);
        ys.push_back(diff);
      }
    }
    if (xs.size() >= 2) {
      const double slope = loglog_slope(xs, ys);
      fit << "loglog_slope_J0_error_vs_dt," << format_double(slope) << '\n';
      out << "fitted weak-error slope of J0 in dt: " << slope << "\n";
      have_fit = true;
    }
  }
  if (have_fit) {
    write_text(join(o.out, "fit.csv"), fit.str());
    files.push_back("fit.csv");
  }
  write_manifest(o.out, "sweep", base,
                 {{"vary", o.vary}, {"values", values}, {"paths", o.paths}, {"seed", o.seed}},
                 files);
  out << "sweep over " << o.vary << ": " << rows.size() << " runs -> " << o.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Solver and simulator for LQ Stackelberg mean-field games and teams", "stackmf"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Scenario file")->required();
    sub->add_option("--out", o.out, "Output directory");
  };
  auto sim_flags = [&](CLI::App* sub) {
    sub->add_option("--paths", o.paths, "Monte Carlo paths");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* solve = app.add_subcommand("solve", "Solve follower and leader gains");
  common(solve);

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo simulation of the closed loop");
  common(sim);
  sim_flags(sim);
  sim->add_option("--gains", o.gains, "Directory with P.csv, K.csv, Pi.csv to use");
  sim->add_option("--dump-paths", o.dump_paths, "Paths written to trajectories.csv");

  CLI::App* verify = app.add_subcommand("verify", "Certify the equilibrium numerically");
  common(verify);
  sim_flags(verify);
  o.paths = 1000;
  verify->add_option("--gains", o.gains, "Directory with P.csv, K.csv, Pi.csv to use");
  verify->add_option("--directions", o.directions, "Deviation directions (0: zero direction)");

  CLI::App* sweep = app.add_subcommand("sweep", "Repeat solve and simulate over a parameter");
  common(sweep);
  sim_flags(sweep);
  sweep->add_option("--vary", o.vary, "N, Gamma or steps")->required();
  sweep->add_option("--values", o.values, "Comma-separated values")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(o, out, err);
    if (sim->parsed()) return cmd_simulate(o, out, err);
    if (verify->parsed()) return cmd_verify(o, out, err);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const BlowUpError& e) {
    err << "error: Riccati integration failed: " << e.what() << "\n";
    return kExitBlowUp;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace stackmf
