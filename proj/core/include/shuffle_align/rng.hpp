#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "shuffle_align/types.hpp"

namespace shuffle_align {

// All randomness in the library flows through this one generator so that
// results are reproducible bit-for-bit from a 64-bit seed, independent of
// the standard library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stable 64-bit combine; order-sensitive.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in (0, 1]; never 0, so log() is safe.
  double uniform_open() {
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return 1.0 - u;
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// One integer uniform in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard circularly-symmetric complex Gaussian CN(0,1):
  /// real and imaginary parts are N(0, 1/2). Box-Muller.
  Complex cgauss() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-std::log(u1));  // sqrt(-2 ln u) / sqrt(2)
    const double th = 6.283185307179586476925286766559 * u2;
    return Complex(r * std::cos(th), r * std::sin(th));
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

inline CMat random_cgauss_matrix(Index rows, Index cols, Rng& rng) {
  CMat m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.cgauss();
  return m;
}

}  // namespace shuffle_align
