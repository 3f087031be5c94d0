#pragma once

#include "stackmf/follower_gains.hpp"
#include "stackmf/grid_function.hpp"
#include "stackmf/leader_gains.hpp"
#include "stackmf/model.hpp"

namespace stackmf {

/// Everything needed to simulate one scenario: follower gains (with phi taken
/// from the leader's closed loop), the block system, the leader gains and the
/// deterministic mean of the leader-layer state.
struct SolvedScenario {
  Scenario scenario;
  FollowerGains followers;
  BlockSystem blocks;
  LeaderGains leader;
  GridFunction mean_state;  // E[X], 3n-vector per node
  GridFunction phi;         // e3 (M E[X] + V)

  // Block views of E[X].
  GridFunction mean_x0() const;
  GridFunction mean_x() const;
};

// Validates, then solves follower and leader stages. Throws ValidationError or
// BlowUpError.
SolvedScenario solve_all(const Scenario& s);

// Rebuilds the leader stage and mean state from given follower gains (used
// when gains are loaded from disk).
SolvedScenario solve_from_follower_gains(const Scenario& s, FollowerGains fg);

GridFunction block_of(const GridFunction& g, int block, int n);

}  // namespace stackmf
