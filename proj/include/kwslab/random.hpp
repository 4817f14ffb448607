#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace kws {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a over a byte string.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Derives an independent stream seed from a base seed and a list of keys.
template <typename... Keys>
std::uint64_t derive_seed(std::uint64_t base, Keys... keys) {
  std::uint64_t s = splitmix64(base);
  ((s = splitmix64(s ^ static_cast<std::uint64_t>(keys))), ...);
  return s;
}

/// Random source with platform-independent draws. The std distributions are
/// implementation-defined, so every variate here is derived from raw
/// mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span);
    std::uint64_t v;
    do v = engine_();
    while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

  /// Box-Muller, no cached second variate.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1;
    do u1 = uniform();
    while (u1 <= 0.0);
    const double u2 = uniform();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson by sequential inversion of the CDF; one uniform per draw.
  std::int64_t poisson(double lambda) {
    const double u = uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    std::int64_t k = 0;
    while (u >= cdf && k < 100000) {
      ++k;
      p *= lambda / double(k);
      cdf += p;
      if (p == 0.0 && cdf < u) break;
    }
    return k;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kws
