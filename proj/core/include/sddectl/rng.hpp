#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "sddectl/types.hpp"

namespace sddectl {

/// Seeded Gaussian stream: MT19937-64 uniforms fed through the Box-Muller
/// transform (the spare draw is cached). Given a seed the stream is fully
/// deterministic, so simulations replay bit-for-bit; Monte Carlo batches use
/// one stream per path with seed `seed_base + path_index`.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

  /// Standard normal draw.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// p independent Brownian increments over a step of length dt: N(0, dt) each.
/// dt = 0 degenerates to the zero vector without consuming randomness.
inline Vec brownian_increment(GaussianRng& rng, double dt, int noise_dim) {
  if (!(dt >= 0.0)) {
    throw DomainError("brownian_increment: dt must be nonnegative");
  }
  Vec out = Vec::Zero(noise_dim);
  if (dt == 0.0) {
    return out;
  }
  const double sd = std::sqrt(dt);
  for (int i = 0; i < noise_dim; ++i) {
    out[i] = sd * rng.normal();
  }
  return out;
}

}  // namespace sddectl
