#include "stackmf/noise.hpp"

#include <cmath>
#include <numbers>

namespace stackmf {

namespace {

constexpr uint32_t kDomainIncrement = 0;
constexpr uint32_t kDomainInitUniform = 1;
constexpr uint32_t kDomainInitNormal = 2;

inline double to_unit(uint32_t x) { return (static_cast<double>(x) + 0.5) * 0x1p-32; }

}  // namespace

std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> c, uint64_t key) {
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = uint64_t{0xD2511F53u} * c[0];
    const uint64_t p1 = uint64_t{0xCD9E8D57u} * c[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  return c;
}

void NoiseSource::normals(uint32_t domain, uint32_t path, uint32_t agent, int count,
                          double* out) const {
  for (int base = 0; base < count; base += 4) {
    const auto r = philox4x32({static_cast<uint32_t>(base / 4), agent, path, domain}, seed_);
    for (int pair = 0; pair < 2; ++pair) {
      const double radius = std::sqrt(-2.0 * std::log(to_unit(r[2 * pair])));
      const double angle = 2.0 * std::numbers::pi * to_unit(r[2 * pair + 1]);
      const int i = base + 2 * pair;
      if (i < count) out[i] = radius * std::cos(angle);
      if (i + 1 < count) out[i + 1] = radius * std::sin(angle);
    }
  }
}

void NoiseSource::increments(uint32_t path, uint32_t agent, int count, double* out) const {
  normals(kDomainIncrement, path, agent, count, out);
}

void NoiseSource::init_normals(uint32_t path, uint32_t agent, int count, double* out) const {
  normals(kDomainInitNormal, path, agent, count, out);
}

void NoiseSource::init_uniforms(uint32_t path, uint32_t agent, int count, double* out) const {
  for (int base = 0; base < count; base += 4) {
    const auto r =
        philox4x32({static_cast<uint32_t>(base / 4), agent, path, kDomainInitUniform}, seed_);
    for (int j = 0; j < 4 && base + j < count; ++j) out[base + j] = to_unit(r[j]);
  }
}

Eigen::VectorXd draw_initial(const Distribution& law, const NoiseSource& noise, uint32_t path,
                             uint32_t agent) {
  const int n = static_cast<int>(law.a.size());
  Eigen::VectorXd x(n);
  switch (law.kind) {
    case Distribution::Kind::kConstant:
      return law.a;
    case Distribution::Kind::kUniform:
      noise.init_uniforms(path, agent, n, x.data());
      return law.a.array() + (law.b - law.a).array() * x.array();
    case Distribution::Kind::kGaussian:
      noise.init_normals(path, agent, n, x.data());
      return law.a.array() + law.b.array().sqrt() * x.array();
  }
  return law.a;
}

}  // namespace stackmf
