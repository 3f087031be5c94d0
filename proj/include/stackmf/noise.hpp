#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

#include "stackmf/model.hpp"

namespace stackmf {

/// Philox4x32-10 counter-based generator.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> counter, uint64_t key);

/// Deterministic random streams addressed by (path, agent). Agent 0 is the
/// leader, agents 1..N the followers. A stream's values depend only on the seed
/// and its address, so any work split reproduces the same numbers.
class NoiseSource {
 public:
  explicit NoiseSource(uint64_t seed) : seed_(seed) {}
  uint64_t seed() const { return seed_; }

  // Standard normals driving the Brownian increments, steps 0..count-1.
  void increments(uint32_t path, uint32_t agent, int count, double* out) const;
  // Uniforms on (0, 1) and standard normals for initial-state draws.
  void init_uniforms(uint32_t path, uint32_t agent, int count, double* out) const;
  void init_normals(uint32_t path, uint32_t agent, int count, double* out) const;

 private:
  void normals(uint32_t domain, uint32_t path, uint32_t agent, int count, double* out) const;
  uint64_t seed_;
};

// Draws one initial state from `law` for (path, agent).
Eigen::VectorXd draw_initial(const Distribution& law, const NoiseSource& noise, uint32_t path,
                             uint32_t agent);

}  // namespace stackmf
