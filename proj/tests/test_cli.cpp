#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stackmf/cli.hpp"
#include "support.hpp"

using namespace stackmf;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "stackmf");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return CliRun{code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream is(p);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stackmf_cli_" + std::string(
                                 ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    base_ = slurp(stackmf::testing::scenario_path("scalar_team.yaml"));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const std::string& name, const std::string& from = "",
                     const std::string& to = "") {
    if (from.empty()) return config(name, std::vector<std::pair<std::string, std::string>>{});
    return config(name, std::vector<std::pair<std::string, std::string>>{{from, to}});
  }
  std::string config(const std::string& name,
                     const std::vector<std::pair<std::string, std::string>>& edits) {
    std::string text = base_;
    for (const auto& [from, to] : edits) {
      const auto pos = text.find(from);
      EXPECT_NE(pos, std::string::npos) << from;
      text.replace(pos, from.size(), to);
    }
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::string base_;
};

}  // namespace

TEST(Fnv, KnownValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST_F(CliTest, SolveWritesGainFiles) {
  const CliRun r = run({"solve", "--config", config("s.yaml"), "--out", out("o")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"P.csv", "K.csv", "Pi.csv", "phi.csv", "leaderP.csv", "leaderK.csv",
                        "leaderM.csv", "leaderV.csv", "validation.txt", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "o" / f)) << f;
  }
  EXPECT_EQ(lines(dir_ / "o" / "P.csv").size(), 1002u);
  const auto lp = lines(dir_ / "o" / "leaderP.csv");
  EXPECT_EQ(lp.size(), 1002u);
  EXPECT_EQ(std::count(lp[0].begin(), lp[0].end(), ','), 9);
  const std::string manifest = slurp(dir_ / "o" / "manifest.json");
  EXPECT_NE(manifest.find("\"mode\": \"team\""), std::string::npos);
  EXPECT_NE(manifest.find("scenario_hash"), std::string::npos);
}

TEST_F(CliTest, SolveRejectsSingularR) {
  const CliRun r =
      run({"solve", "--config", config("s.yaml", "R: [[0.1]]", "R: [[0.0]]"), "--out", out("o")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("R positive definite"), std::string::npos) << r.err;
  EXPECT_NE(slurp(dir_ / "o" / "validation.txt").find("FAIL  R positive definite"),
            std::string::npos);
}

TEST_F(CliTest, SolveReportsBlowUp) {
  // A negative leader state weight drives the leader Riccati equation to a
  // finite escape, roughly pi/4 before T.
  const std::string cfg =
      config("s.yaml", {{"Q0: [[1.0]]", "Q0: [[-4.0]]"}, {"B0: [[0.1]]", "B0: [[1.0]]"}});
  const CliRun r = run({"solve", "--config", cfg, "--out", out("o")});
  EXPECT_EQ(r.code, kExitBlowUp) << r.err;
  EXPECT_NE(r.err.find("failure time"), std::string::npos) << r.err;
  EXPECT_NE(slurp(dir_ / "o" / "validation.txt").find("failure time"), std::string::npos);
}

TEST_F(CliTest, InputErrors) {
  EXPECT_EQ(run({"solve", "--config", out("missing.yaml"), "--out", out("o")}).code, kExitIo);
  EXPECT_EQ(run({"solve", "--config", config("s.yaml", "Gamma1", "Gamma2"), "--out", out("o")})
                .code,
            kExitValidation);
  EXPECT_EQ(run({"solve", "--config", config("s.yaml", "A: [[-0.05]]", "A: [[-0.05, 1]]"),
                 "--out", out("o")})
                .code,
            kExitValidation);
  EXPECT_EQ(run({"solve"}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"solve", "--config", config("s.yaml"), "--bogus"}).code, kExitUsage);
}

TEST_F(CliTest, SimulateWritesTrajectories) {
  const CliRun r = run({"simulate", "--config", config("s.yaml"), "--out", out("o"), "--paths",
                     "1", "--dump-paths", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto tr = lines(dir_ / "o" / "trajectories.csv");
  ASSERT_EQ(tr.size(), 1002u);
  EXPECT_EQ(tr[0].rfind("path,t,x0,x1,", 0), 0u);
  EXPECT_EQ(std::count(tr[0].begin(), tr[0].end(), ','), 32);  // path, t, 31 agents
  EXPECT_TRUE(fs::exists(dir_ / "o" / "costs.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "o" / "summary.csv"));
}

TEST_F(CliTest, SimulateUsageAndGridErrors) {
  EXPECT_EQ(run({"simulate", "--config", config("s.yaml"), "--out", out("o"), "--paths", "0"})
                .code,
            kExitUsage);
  ASSERT_EQ(run({"solve", "--config", config("s.yaml"), "--out", out("g")}).code, kExitOk);
  const CliRun r = run({"simulate", "--config", config("c.yaml", "steps: 1000", "steps: 500"),
                     "--out", out("o"), "--paths", "2", "--gains", out("g")});
  EXPECT_EQ(r.code, kExitGridMismatch) << r.err;
  EXPECT_EQ(run({"simulate", "--config", config("s.yaml"), "--out", out("o2"), "--paths", "2",
                 "--gains", out("g")})
                .code,
            kExitOk);
}

TEST_F(CliTest, SimulateIsDeterministicAcrossWorkers) {
  const std::string cfg = config("c.yaml", "steps: 1000", "steps: 200");
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", out("a"), "--paths", "130", "--workers",
                 "1"})
                .code,
            kExitOk);
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", out("b"), "--paths", "130", "--workers",
                 "3"})
                .code,
            kExitOk);
  for (const char* f : {"summary.csv", "costs.csv", "trajectories.csv", "manifest.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, VerifyZeroDirection) {
  const CliRun r = run({"verify", "--config", config("s.yaml"), "--out", out("o"), "--paths", "20",
                     "--directions", "0"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("zero direction"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "o" / "verification.csv").find("zero direction"), std::string::npos);
}

TEST_F(CliTest, VerifyNamesInjectedFault) {
  ASSERT_EQ(run({"solve", "--config", config("s.yaml"), "--out", out("g")}).code, kExitOk);
  // Rewrite K.csv with every gain value shifted.
  const auto k = lines(dir_ / "g" / "K.csv");
  std::ofstream os(dir_ / "g" / "K.csv");
  os << k[0] << "\n";
  for (size_t i = 1; i < k.size(); ++i) {
    const auto comma = k[i].find(',');
    os << k[i].substr(0, comma) << "," << std::stod(k[i].substr(comma + 1)) + 0.01 << "\n";
  }
  os.close();
  const CliRun r = run({"verify", "--config", config("s.yaml"), "--out", out("o"), "--paths", "20",
                     "--directions", "0", "--gains", out("g")});
  EXPECT_EQ(r.code, kExitVerification);
  EXPECT_NE(r.err.find("follower sum identity"), std::string::npos) << r.err;
}

TEST_F(CliTest, SweepSingleValueHasNoFit) {
  const CliRun r = run({"sweep", "--config", config("c.yaml", "steps: 1000", "steps: 100"),
                     "--out", out("o"), "--paths", "10", "--vary", "N", "--values", "30"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(lines(dir_ / "o" / "aggregate.csv").size(), 2u);
  EXPECT_FALSE(fs::exists(dir_ / "o" / "fit.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "o" / "N_30" / "costs.csv"));
}

TEST_F(CliTest, SweepStepsLadder) {
  const CliRun r = run({"sweep", "--config", config("s.yaml"), "--out", out("o"), "--paths", "20",
                     "--vary", "steps", "--values", "100,200,400"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(lines(dir_ / "o" / "aggregate.csv").size(), 4u);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "fit.csv"));
  EXPECT_EQ(run({"sweep", "--config", config("s.yaml"), "--out", out("x"), "--vary", "mass",
                 "--values", "1"})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"sweep", "--config", config("s.yaml"), "--out", out("x"), "--vary", "N",
                 "--values", "a,b"})
                .code,
            kExitUsage);
}
