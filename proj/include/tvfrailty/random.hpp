#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "tvfrailty/distributions.hpp"

namespace tvf {

using Engine = std::mt19937_64;

// Independent stream for replicate `index` of a run seeded with `seed`; the
// result does not depend on how replicates are scheduled.
inline Engine replicate_engine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x7466u};
  return Engine(seq);
}

// U = theta W^{1/beta} with W ~ Gamma(k, 1).
inline double draw_gengamma(const GenGammaParams& p, Engine& eng) {
  std::gamma_distribution<double> w(p.k, 1.0);
  double x = w(eng);
  // Gamma(k) with small k can underflow to exactly 0
  while (!(x > 0.0)) x = w(eng);
  return p.theta * std::pow(x, 1.0 / p.beta);
}

// Unit-mean gamma with shape k2 (variance 1/k2).
inline double draw_unit_gamma(double k2, Engine& eng) {
  std::gamma_distribution<double> v(k2, 1.0 / k2);
  return v(eng);
}

}  // namespace tvf
