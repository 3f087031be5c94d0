#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "stackmf/leader_gains.hpp"
#include "stackmf/linode.hpp"
#include "stackmf/pipeline.hpp"
#include "support.hpp"

using namespace stackmf;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using stackmf::testing::random_scenario;
using stackmf::testing::uniform_matrix;

namespace {

BlockSystem::At random_blocks(std::mt19937_64& rng, int n) {
  const int d = 3 * n;
  BlockSystem::At b;
  b.A = uniform_matrix(rng, d, d, -0.5, 0.5);
  b.B = uniform_matrix(rng, d, d, -0.5, 0.5);
  b.A1 = uniform_matrix(rng, d, d, -0.5, 0.5);
  b.B1 = uniform_matrix(rng, d, d, -0.5, 0.5);
  b.A2 = uniform_matrix(rng, d, d, -0.5, 0.5);
  b.B2 = uniform_matrix(rng, d, d, -0.5, 0.5);
  b.f = uniform_matrix(rng, d, 1, -1, 1);
  b.f1 = uniform_matrix(rng, d, 1, -1, 1);
  return b;
}

}  // namespace

TEST(LeaderGains, ScalarTeamSolvesQuickly) {
  const Scenario s = stackmf::testing::scalar_team();
  const auto start = std::chrono::steady_clock::now();
  const SolvedScenario sol = solve_all(s);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 5.0);
  const int T = s.grid.steps();
  for (const GridFunction* g : {&sol.leader.calP, &sol.leader.calK, &sol.leader.calM}) {
    EXPECT_EQ(g->values()[T].norm(), 0.0);
    EXPECT_TRUE(g->is_finite());
  }
  EXPECT_EQ(sol.leader.calV[T].norm(), 0.0);
}

TEST(LeaderGains, BlockSparsity) {
  const SolvedScenario sol = solve_all(stackmf::testing::scalar_team());
  const BlockSystem::At b = sol.blocks.node(0);
  EXPECT_EQ(b.A(0, 1), 0.0);
  EXPECT_EQ(b.B(0, 1), 0.0);
  EXPECT_EQ(b.B(1, 1), 0.0);
  EXPECT_EQ(b.A1.row(2).norm(), 0.0);
  EXPECT_EQ(b.A2(0, 2) + b.A2(2, 0), 0.0);  // skew pair
  EXPECT_EQ(b.f(2), 0.0);
  for (int k = 0; k < sol.scenario.grid.nodes(); ++k) {
    EXPECT_LE(sol.leader.calP[k].row(2).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(LeaderGains, SumIdentity) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 6; ++i) {
    const Scenario s = random_scenario(rng, i % 2 ? Mode::kGame : Mode::kTeam, 1 + i % 2, 1);
    const SolvedScenario sol = solve_all(s);
    double scale = 0.0;
    std::vector<MatrixXd> sum;
    for (int k = 0; k < s.grid.nodes(); ++k) {
      scale = std::max(scale, sol.leader.calM[k].norm());
      sum.push_back(sol.leader.calP[k] + sol.leader.calK[k]);
    }
    EXPECT_LE(max_node_distance(sol.leader.calM, GridFunction(s.grid, sum)), 1e-8 * (1 + scale));
  }
}

TEST(LeaderGains, PhiMatchesFollowerEquation) {
  std::mt19937_64 rng(4);
  const Scenario s = random_scenario(rng, Mode::kGame, 2, 1);
  const SolvedScenario sol = solve_all(s);
  const GridFunction direct = solve_phi(s, sol.followers.Pi, sol.mean_x0());
  EXPECT_LE(max_node_distance(direct, sol.phi), 1e-6);
}

TEST(LeaderGains, ExpmOracleMatchesOde) {
  std::mt19937_64 rng(17);
  for (int n : {1, 2}) {
    for (int rep = 0; rep < 3; ++rep) {
      const BlockSystem bs =
          constant_blocks(TimeGrid(1.0, 1000), n, random_blocks(rng, n), VectorXd::Zero(3 * n));
      const GridFunction ode = solve_leader_P(bs);
      const GridFunction oracle = leader_P_expm_oracle(bs, FlowVariant::kB1);
      EXPECT_LE(max_node_distance(ode, oracle), 1e-8) << "n=" << n;
    }
  }
}

TEST(LeaderGains, ConjugatePoint) {
  // A = 0, B = 1, A1 = -1, B1 = 0: P = tan(T - t), singular at T - pi/2.
  BlockSystem::At b;
  b.A = MatrixXd::Zero(3, 3);
  b.B = MatrixXd::Identity(3, 3);
  b.A1 = -MatrixXd::Identity(3, 3);
  b.B1 = b.A2 = b.B2 = MatrixXd::Zero(3, 3);
  b.f = b.f1 = VectorXd::Zero(3);
  const double T = 2.0;
  const BlockSystem bs = constant_blocks(TimeGrid(T, 2000), 1, b, VectorXd::Zero(3));
  try {
    leader_P_expm_oracle(bs);
    FAIL() << "expected a singular flow";
  } catch (const SingularFlowError& e) {
    EXPECT_NEAR(e.time(), T - M_PI / 2, 0.01);
  }
  try {
    solve_leader_P(bs);
    FAIL() << "expected blow-up";
  } catch (const BlowUpError& e) {
    EXPECT_NEAR(e.time(), T - M_PI / 2, 0.02);
  }
  // Before the conjugate point the ODE matches tan.
  const BlockSystem short_bs = constant_blocks(TimeGrid(1.0, 1000), 1, b, VectorXd::Zero(3));
  EXPECT_NEAR(solve_leader_P(short_bs)[0](0, 0), std::tan(1.0), 1e-10);
}

TEST(LeaderGains, MeanStateStartsAtInitialMeans) {
  const SolvedScenario sol = solve_all(stackmf::testing::scalar_team());
  EXPECT_DOUBLE_EQ(sol.mean_state[0](0, 0), 5.0);
  EXPECT_DOUBLE_EQ(sol.mean_state[0](1, 0), 10.0);
  EXPECT_DOUBLE_EQ(sol.mean_state[0](2, 0), 0.0);
}
