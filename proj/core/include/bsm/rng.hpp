#ifndef BSM_RNG_HPP
#define BSM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace bsm {

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent per-participant / per-chain
// seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform on (0, 1). Explicit construction instead of std distributions so
// draws do not depend on library internals.
inline double draw_uniform(Rng& rng) {
  // 53-bit mantissa, shifted into (0,1) to keep log() safe
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
}

// Standard normal via Box-Muller. One value per call; the discarded twin
// costs nothing compared to the likelihood evaluations downstream.
inline double draw_normal(Rng& rng) {
  const double u1 = draw_uniform(rng);
  const double u2 = draw_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

inline double draw_lognormal(Rng& rng) { return std::exp(draw_normal(rng)); }

// Half-Cauchy(0, scale) via inverse CDF.
inline double draw_half_cauchy(Rng& rng, double scale) {
  return scale * std::tan(std::numbers::pi * 0.5 * draw_uniform(rng));
}

// Chi-squared with integer df (small df only; used by the student-t noise).
inline double draw_chi_squared(Rng& rng, int df) {
  double s = 0.0;
  for (int i = 0; i < df; ++i) {
    const double z = draw_normal(rng);
    s += z * z;
  }
  return s;
}

// Uniform integer in [0, n).
inline int draw_index(Rng& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

inline bool draw_bernoulli(Rng& rng, double p) { return draw_uniform(rng) < p; }

}  // namespace bsm

#endif
