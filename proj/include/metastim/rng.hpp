#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace metastim {

/// Small deterministic PRNG (splitmix64 core). The standard <random>
/// distributions are implementation-defined, so everything that must be
/// bit-reproducible across toolchains goes through this class instead.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // decorrelate trivially related seeds
    next_u64();
  }

  /// Independent stream derived from (seed, stream). Used to give each
  /// trial / epoch / null-set copy its own deterministic generator.
  static Rng from_stream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Log-uniform over [lo, hi], lo > 0.
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Inclusive range.
  int uniform_int(int lo, int hi) {
    return lo + int(below(std::uint64_t(hi - lo) + 1));
  }

  /// Standard normal, Box-Muller with cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Stable sub-seed derivation for independent work units.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r = Rng::from_stream(seed, stream);
  return r.next_u64();
}

} // namespace metastim
