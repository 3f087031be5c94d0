#include "stackmf/pipeline.hpp"

namespace stackmf {

GridFunction block_of(const GridFunction& g, int block, int n) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(g.size());
  for (int k = 0; k < g.size(); ++k) out.emplace_back(g[k].block(block * n, 0, n, g.cols()));
  return GridFunction(g.grid(), std::move(out));
}

GridFunction SolvedScenario::mean_x0() const { return block_of(mean_state, 0, scenario.dims.n); }

GridFunction SolvedScenario::mean_x() const { return block_of(mean_state, 1, scenario.dims.n); }

SolvedScenario solve_from_follower_gains(const Scenario& s, FollowerGains fg) {
  require_valid(s);
  BlockSystem bs = assemble_blocks(s, fg);
  LeaderGains lg = solve_leader_gains(s, bs);
  GridFunction mean = solve_mean_state(bs, lg, s.mean_leader_init(), s.mean_follower_init());
  GridFunction phi = reconstruct_phi(bs, lg, mean);
  fg.phi = phi;
  return SolvedScenario{s, std::move(fg), std::move(bs), std::move(lg), std::move(mean),
                        std::move(phi)};
}

SolvedScenario solve_all(const Scenario& s) {
  return solve_from_follower_gains(s, solve_follower_gains(s));
}

}  // namespace stackmf
