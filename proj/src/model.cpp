#include "stackmf/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "stackmf/config.hpp"
#include "stackmf/format.hpp"

namespace stackmf {

const char* mode_name(Mode mode) { return mode == Mode::kGame ? "game" : "team"; }

const Eigen::VectorXd& Signal::at_node(int k) const {
  return samples[std::min<size_t>(static_cast<size_t>(k), samples.size() - 1)];
}

GridFunction Signal::on(const TimeGrid& grid) const {
  std::vector<Eigen::MatrixXd> values;
  values.reserve(grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) values.emplace_back(at_node(k));
  return GridFunction(grid, std::move(values));
}

Eigen::VectorXd Distribution::mean() const {
  switch (kind) {
    case Kind::kConstant:
      return a;
    case Kind::kUniform:
      return 0.5 * (a + b);
    case Kind::kGaussian:
      return a;
  }
  return a;
}

Eigen::VectorXd Distribution::variance() const {
  switch (kind) {
    case Kind::kConstant:
      return Eigen::VectorXd::Zero(a.size());
    case Kind::kUniform:
      return (b - a).array().square() / 12.0;
    case Kind::kGaussian:
      return b;
  }
  return b;
}

Scenario Scenario::with_steps(int steps) const {
  Scenario out = *this;
  out.grid = TimeGrid(grid.horizon(), steps);
  return out;
}

Scenario Scenario::with_N(int N) const {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  Scenario out = *this;
  out.dims.N = N;
  return out;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

using Kind = ConfigValue::Kind;
using Section = std::map<std::string, ConfigValue>;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"", {"mode"}},
      {"dims", {"n", "m", "N"}},
      {"leader", {"A0", "B0", "f0", "f0_samples", "D0"}},
      {"follower", {"A", "B", "f", "f_samples", "D"}},
      {"cost.leader", {"Q0", "R0", "Gamma0", "eta0", "eta0_samples"}},
      {"cost.follower", {"Q", "R", "Gamma", "Gamma1", "eta", "eta_samples"}},
      {"init",
       {"leader_dist", "leader_value", "leader_low", "leader_high", "leader_mean", "leader_var",
        "follower_dist", "follower_value", "follower_low", "follower_high", "follower_mean",
        "follower_var"}},
      {"grid", {"T", "steps"}},
  };
  return s;
}

std::string where(const std::string& sec, const std::string& key) {
  return sec.empty() ? key : sec + "." + key;
}

class Reader {
 public:
  explicit Reader(const ConfigTable& t) : t_(t) {}

  const ConfigValue* find(const std::string& sec, const std::string& key) const {
    auto s = t_.find(sec);
    if (s == t_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  const ConfigValue& get(const std::string& sec, const std::string& key) const {
    const ConfigValue* v = find(sec, key);
    if (!v) throw ParseError("missing required key " + where(sec, key));
    return *v;
  }

  double number(const std::string& sec, const std::string& key) const {
    const ConfigValue& v = get(sec, key);
    if (v.kind != Kind::kNumber) throw ParseError(where(sec, key) + " must be a number");
    return v.number;
  }

  int integer(const std::string& sec, const std::string& key) const {
    double x = number(sec, key);
    if (x != std::floor(x) || std::abs(x) > 1e9) {
      throw ParseError(where(sec, key) + " must be an integer");
    }
    return static_cast<int>(x);
  }

  std::string text(const std::string& sec, const std::string& key) const {
    const ConfigValue& v = get(sec, key);
    if (v.kind != Kind::kString) throw ParseError(where(sec, key) + " must be a string");
    return v.text;
  }

  static Eigen::VectorXd to_vector(const ConfigValue& v, int n, const std::string& name) {
    if (v.kind == Kind::kNumber && n == 1) return Eigen::VectorXd::Constant(1, v.number);
    if (v.kind != Kind::kArray) throw ParseError(name + " must be an array");
    if (static_cast<int>(v.items.size()) != n) {
      throw DimensionError(name + ": expected " + std::to_string(n) + " entries, got " +
                           std::to_string(v.items.size()));
    }
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) {
      if (v.items[i].kind != Kind::kNumber) {
        throw DimensionError(name + ": expected a flat array of numbers");
      }
      out(i) = v.items[i].number;
    }
    return out;
  }

  static Eigen::MatrixXd to_matrix(const ConfigValue& v, int rows, int cols,
                                   const std::string& name) {
    if (v.kind == Kind::kNumber && rows == 1 && cols == 1) {
      return Eigen::MatrixXd::Constant(1, 1, v.number);
    }
    auto shape = [&](const std::string& got) {
      return DimensionError(name + ": expected " + std::to_string(rows) + "x" +
                            std::to_string(cols) + " matrix, got " + got);
    };
    if (v.kind != Kind::kArray) throw ParseError(name + " must be a nested array");
    if (static_cast<int>(v.items.size()) != rows) {
      throw shape(std::to_string(v.items.size()) + " rows");
    }
    Eigen::MatrixXd out(rows, cols);
    for (int i = 0; i < rows; ++i) {
      const ConfigValue& row = v.items[i];
      if (row.kind != Kind::kArray) throw shape("a non-array row");
      if (static_cast<int>(row.items.size()) != cols) {
        throw shape(std::to_string(row.items.size()) + " columns in row " + std::to_string(i));
      }
      for (int j = 0; j < cols; ++j) {
        if (row.items[j].kind != Kind::kNumber) throw shape("a non-numeric entry");
        out(i, j) = row.items[j].number;
      }
    }
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& sec, const std::string& key, int rows,
                         int cols) const {
    return to_matrix(get(sec, key), rows, cols, where(sec, key));
  }

  Eigen::VectorXd vector(const std::string& sec, const std::string& key, int n) const {
    return to_vector(get(sec, key), n, where(sec, key));
  }

  Signal signal(const std::string& sec, const std::string& key, int n, int nodes) const {
    const ConfigValue* c = find(sec, key);
    const ConfigValue* s = find(sec, key + "_samples");
    if (c && s) throw ParseError(where(sec, key) + " and " + key + "_samples are exclusive");
    if (s) {
      if (s->kind != Kind::kArray || s->items.empty()) {
        throw ParseError(where(sec, key + "_samples") + " must be a non-empty array");
      }
      if (static_cast<int>(s->items.size()) > nodes) {
        throw DimensionError(where(sec, key + "_samples") + ": more samples than grid nodes");
      }
      Signal out;
      for (const auto& item : s->items) {
        out.samples.push_back(to_vector(item, n, where(sec, key + "_samples")));
      }
      return out;
    }
    if (c) return Signal::Constant(to_vector(*c, n, where(sec, key)));
    return Signal::Constant(Eigen::VectorXd::Zero(n));
  }

  Distribution distribution(const std::string& who, int n) const {
    const std::string kind = text("init", who + "_dist");
    Distribution d;
    std::set<std::string> used = {who + "_dist"};
    if (kind == "constant") {
      d.kind = Distribution::Kind::kConstant;
      d.a = vector("init", who + "_value", n);
      d.b = Eigen::VectorXd::Zero(n);
      used.insert(who + "_value");
    } else if (kind == "uniform") {
      d.kind = Distribution::Kind::kUniform;
      d.a = vector("init", who + "_low", n);
      d.b = vector("init", who + "_high", n);
      used.insert({who + "_low", who + "_high"});
    } else if (kind == "gaussian") {
      d.kind = Distribution::Kind::kGaussian;
      d.a = vector("init", who + "_mean", n);
      d.b = vector("init", who + "_var", n);
      used.insert({who + "_mean", who + "_var"});
    } else {
      throw ParseError("init." + who + "_dist must be constant, uniform or gaussian");
    }
    for (const auto& [key, value] : t_.at("init")) {
      if (key.rfind(who + "_", 0) == 0 && !used.count(key)) {
        throw UnknownKeyError("init." + key + " does not apply to a " + kind + " law");
      }
    }
    return d;
  }

 private:
  const ConfigTable& t_;
};

}  // namespace

Scenario load_scenario(const std::string& text) {
  const ConfigTable table = parse_config(text);
  for (const auto& [sec, keys] : table) {
    auto allowed = schema().find(sec);
    if (allowed == schema().end()) throw UnknownKeyError("unknown section " + sec);
    for (const auto& [key, value] : keys) {
      if (!allowed->second.count(key)) {
        throw UnknownKeyError("unknown key " + where(sec, key) + " (line " +
                              std::to_string(value.line) + ")");
      }
    }
  }
  for (const char* sec : {"dims", "leader", "follower", "cost.leader", "cost.follower", "init",
                          "grid"}) {
    if (!table.count(sec)) throw ParseError(std::string("missing section ") + sec);
  }

  Reader r(table);
  Scenario s;
  const std::string mode = r.text("", "mode");
  if (mode == "game") {
    s.mode = Mode::kGame;
  } else if (mode == "team") {
    s.mode = Mode::kTeam;
  } else {
    throw ParseError("mode must be \"game\" or \"team\"");
  }

  s.dims.n = r.integer("dims", "n");
  s.dims.m = r.integer("dims", "m");
  s.dims.N = r.integer("dims", "N");
  if (s.dims.n < 1 || s.dims.m < 1 || s.dims.N < 1) {
    throw std::invalid_argument("dims.n, dims.m, dims.N must all be >= 1");
  }
  const int n = s.dims.n, m = s.dims.m;

  const int steps = r.integer("grid", "steps");
  s.grid = TimeGrid(r.number("grid", "T"), steps);
  const int nodes = s.grid.nodes();

  s.leader.A0 = r.matrix("leader", "A0", n, n);
  s.leader.B0 = r.matrix("leader", "B0", n, m);
  s.leader.f0 = r.signal("leader", "f0", n, nodes);
  s.leader.D0 = r.vector("leader", "D0", n);

  s.follower.A = r.matrix("follower", "A", n, n);
  s.follower.B = r.matrix("follower", "B", n, m);
  s.follower.f = r.signal("follower", "f", n, nodes);
  s.follower.D = r.vector("follower", "D", n);

  s.leader_cost.Q0 = r.matrix("cost.leader", "Q0", n, n);
  s.leader_cost.R0 = r.matrix("cost.leader", "R0", m, m);
  s.leader_cost.Gamma0 = r.matrix("cost.leader", "Gamma0", n, n);
  s.leader_cost.eta0 = r.signal("cost.leader", "eta0", n, nodes);

  s.follower_cost.Q = r.matrix("cost.follower", "Q", n, n);
  s.follower_cost.R = r.matrix("cost.follower", "R", m, m);
  s.follower_cost.Gamma = r.matrix("cost.follower", "Gamma", n, n);
  s.follower_cost.Gamma1 = r.matrix("cost.follower", "Gamma1", n, n);
  s.follower_cost.eta = r.signal("cost.follower", "eta", n, nodes);

  s.init.leader = r.distribution("leader", n);
  s.init.follower = r.distribution("follower", n);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return load_scenario(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string vec_text(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v(i));
  }
  return out + "]";
}

std::string mat_text(const Eigen::MatrixXd& m) {
  std::string out = "[";
  for (int i = 0; i < m.rows(); ++i) {
    if (i) out += ", ";
    out += vec_text(m.row(i).transpose());
  }
  return out + "]";
}

void put_signal(std::ostream& os, const std::string& indent, const std::string& key,
                const Signal& s) {
  if (s.is_constant()) {
    os << indent << key << ": " << vec_text(s.samples[0]) << "\n";
    return;
  }
  os << indent << key << "_samples:\n";
  for (const auto& v : s.samples) os << indent << "  - " << vec_text(v) << "\n";
}

void put_dist(std::ostream& os, const std::string& who, const Distribution& d) {
  switch (d.kind) {
    case Distribution::Kind::kConstant:
      os << "  " << who << "_dist: constant\n  " << who << "_value: " << vec_text(d.a) << "\n";
      break;
    case Distribution::Kind::kUniform:
      os << "  " << who << "_dist: uniform\n  " << who << "_low: " << vec_text(d.a) << "\n  "
         << who << "_high: " << vec_text(d.b) << "\n";
      break;
    case Distribution::Kind::kGaussian:
      os << "  " << who << "_dist: gaussian\n  " << who << "_mean: " << vec_text(d.a)
         << "\n  " << who << "_var: " << vec_text(d.b) << "\n";
      break;
  }
}

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool same(const Signal& a, const Signal& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (size_t k = 0; k < a.samples.size(); ++k) {
    if (!same(a.samples[k], b.samples[k])) return false;
  }
  return true;
}

bool same(const Distribution& a, const Distribution& b) {
  return a.kind == b.kind && same(a.a, b.a) && same(a.b, b.b);
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "mode: " << mode_name(s.mode) << "\n\n";
  os << "dims:\n  n: " << s.dims.n << "\n  m: " << s.dims.m << "\n  N: " << s.dims.N << "\n\n";
  os << "leader:\n  A0: " << mat_text(s.leader.A0) << "\n  B0: " << mat_text(s.leader.B0)
     << "\n";
  put_signal(os, "  ", "f0", s.leader.f0);
  os << "  D0: " << vec_text(s.leader.D0) << "\n\n";
  os << "follower:\n  A: " << mat_text(s.follower.A) << "\n  B: " << mat_text(s.follower.B)
     << "\n";
  put_signal(os, "  ", "f", s.follower.f);
  os << "  D: " << vec_text(s.follower.D) << "\n\n";
  os << "cost:\n  leader:\n    Q0: " << mat_text(s.leader_cost.Q0)
     << "\n    R0: " << mat_text(s.leader_cost.R0)
     << "\n    Gamma0: " << mat_text(s.leader_cost.Gamma0) << "\n";
  put_signal(os, "    ", "eta0", s.leader_cost.eta0);
  os << "  follower:\n    Q: " << mat_text(s.follower_cost.Q)
     << "\n    R: " << mat_text(s.follower_cost.R)
     << "\n    Gamma: " << mat_text(s.follower_cost.Gamma)
     << "\n    Gamma1: " << mat_text(s.follower_cost.Gamma1) << "\n";
  put_signal(os, "    ", "eta", s.follower_cost.eta);
  os << "\ninit:\n";
  put_dist(os, "leader", s.init.leader);
  put_dist(os, "follower", s.init.follower);
  os << "\ngrid:\n  T: " << format_double(s.grid.horizon()) << "\n  steps: " << s.grid.steps()
     << "\n";
  return os.str();
}

bool identical(const Scenario& a, const Scenario& b) {
  return a.mode == b.mode && a.dims.n == b.dims.n && a.dims.m == b.dims.m &&
         a.dims.N == b.dims.N && a.grid == b.grid && same(a.leader.A0, b.leader.A0) &&
         same(a.leader.B0, b.leader.B0) && same(a.leader.f0, b.leader.f0) &&
         same(a.leader.D0, b.leader.D0) && same(a.follower.A, b.follower.A) &&
         same(a.follower.B, b.follower.B) && same(a.follower.f, b.follower.f) &&
         same(a.follower.D, b.follower.D) && same(a.leader_cost.Q0, b.leader_cost.Q0) &&
         same(a.leader_cost.R0, b.leader_cost.R0) &&
         same(a.leader_cost.Gamma0, b.leader_cost.Gamma0) &&
         same(a.leader_cost.eta0, b.leader_cost.eta0) &&
         same(a.follower_cost.Q, b.follower_cost.Q) && same(a.follower_cost.R, b.follower_cost.R) &&
         same(a.follower_cost.Gamma, b.follower_cost.Gamma) &&
         same(a.follower_cost.Gamma1, b.follower_cost.Gamma1) &&
         same(a.follower_cost.eta, b.follower_cost.eta) && same(a.init.leader, b.init.leader) &&
         same(a.init.follower, b.init.follower);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

bool is_symmetric(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm());
}

}  // namespace

bool is_positive_definite(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) return false;
  const Eigen::VectorXd ev = sym_eigenvalues(m);
  return ev.minCoeff() > 1e-10 * (1.0 + ev.maxCoeff());
}

bool is_positive_semidefinite(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) return false;
  const Eigen::VectorXd ev = sym_eigenvalues(m);
  return ev.minCoeff() >= -1e-10 * (1.0 + ev.cwiseAbs().maxCoeff());
}

bool ValidationReport::ok() const {
  for (const auto& c : checks) {
    if (c.hard && !c.passed) return false;
  }
  return true;
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::vector<std::string> ValidationReport::hard_failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (c.hard && !c.passed) out.push_back(c.name);
  }
  return out;
}

std::vector<std::string> ValidationReport::warnings() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.hard && !c.passed) out.push_back(c.name);
  }
  return out;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS" : (c.hard ? "FAIL" : "WARN")) << "  " << c.name;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  return os.str();
}

ValidationReport validate(const Scenario& s) {
  ValidationReport rep;
  auto add = [&](std::string name, bool passed, bool hard, double value, std::string detail) {
    rep.checks.push_back({std::move(name), passed, hard, value, std::move(detail)});
  };
  auto min_eig = [](const Eigen::MatrixXd& m) {
    return m.allFinite() ? sym_eigenvalues(m).minCoeff() : std::nan("");
  };

  bool finite = s.leader.A0.allFinite() && s.leader.B0.allFinite() && s.leader.D0.allFinite() &&
                s.follower.A.allFinite() && s.follower.B.allFinite() &&
                s.follower.D.allFinite() && s.leader_cost.Gamma0.allFinite() &&
                s.follower_cost.Gamma.allFinite() && s.follower_cost.Gamma1.allFinite();
  for (const Signal* sig :
       {&s.leader.f0, &s.follower.f, &s.leader_cost.eta0, &s.follower_cost.eta}) {
    for (const auto& v : sig->samples) finite = finite && v.allFinite();
  }
  add("coefficients finite", finite, true, 0.0, "");

  const auto& fc = s.follower_cost;
  const auto& lc = s.leader_cost;
  add("Q symmetric", is_symmetric(fc.Q), true, (fc.Q - fc.Q.transpose()).norm(), "");
  add("R symmetric", is_symmetric(fc.R), true, (fc.R - fc.R.transpose()).norm(), "");
  add("Q0 symmetric", is_symmetric(lc.Q0), true, (lc.Q0 - lc.Q0.transpose()).norm(), "");
  add("R0 symmetric", is_symmetric(lc.R0), true, (lc.R0 - lc.R0.transpose()).norm(), "");

  const bool r_pd = is_positive_definite(fc.R);
  add("R positive definite", r_pd, true, min_eig(fc.R),
      r_pd ? "" : "R not positive definite");
  const bool r0_pd = is_positive_definite(lc.R0);
  add("R0 positive definite", r0_pd, true, min_eig(lc.R0),
      r0_pd ? "" : "R0 not positive definite");
  add("Q positive semidefinite", is_positive_semidefinite(fc.Q), false, min_eig(fc.Q), "");
  add("Q0 positive semidefinite", is_positive_semidefinite(lc.Q0), false, min_eig(lc.Q0), "");

  // Sufficient condition for the game-mode Pi equation: the symmetric part of
  // (I - Gamma/N)^T (I - Gamma) is positive semidefinite.
  const int n = s.dims.n;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd C = (I - fc.Gamma / s.dims.N).transpose() * (I - fc.Gamma);
  const double c_min = min_eig(C);
  std::ostringstream cd;
  cd << "min eig of sym((I - Gamma/N)^T (I - Gamma)) = " << c_min;
  add("mean-field weight condition", is_positive_semidefinite(C), false, c_min, cd.str());
  const double coupling = fc.Gamma.norm() / s.dims.N;
  add("mean-field coupling |Gamma|/N < 1", coupling < 1.0, false, coupling, "");

  auto law_ok = [](const Distribution& d) {
    if (!d.a.allFinite() || !d.b.allFinite()) return false;
    if (d.kind == Distribution::Kind::kUniform) return (d.a.array() <= d.b.array()).all();
    if (d.kind == Distribution::Kind::kGaussian) return (d.b.array() >= 0.0).all();
    return true;
  };
  add("leader initial law has finite second moments", law_ok(s.init.leader), true, 0.0, "");
  add("follower initial law has finite second moments", law_ok(s.init.follower), true, 0.0, "");
  return rep;
}

void require_valid(const Scenario& s) {
  const ValidationReport rep = validate(s);
  if (rep.ok()) return;
  std::string msg = "scenario failed validation:";
  for (const auto& name : rep.hard_failures()) msg += " [" + name + "]";
  throw ValidationError(msg);
}

}  // namespace stackmf
