#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mqam {

/// 64-bit generator used everywhere a seeded random source is needed.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from
/// structured keys such as (master seed, iteration, initial state).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
  std::uint64_t s = mix64(master);
  s = mix64(s ^ a);
  s = mix64(s ^ b);
  return mix64(s ^ c);
}

/// Uniform double in [0,1) built from the top 53 bits. Unlike
/// std::uniform_real_distribution this is identical across standard
/// library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw from a cumulative distribution. `cdf` is nondecreasing
/// with last entry ~1; the last index absorbs any rounding slack.
inline std::size_t draw_from_cdf(std::span<const double> cdf, double u) {
  std::size_t k = 0;
  const std::size_t last = cdf.size() - 1;
  while (k < last && u >= cdf[k]) ++k;
  return k;
}

}  // namespace mqam
