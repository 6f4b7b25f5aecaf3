#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace casf {

/// Base class for every failure raised by the toolkit. Messages are single
/// lines so the CLI can print them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of a state transition does not hold (e.g. selecting while
/// annotations are outstanding). The service maps this to HTTP 409.
class StateError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Seeded generator with a fully specified output stream.
///
/// The engine is std::mt19937_64 (its sequence is fixed by the standard),
/// seeded through SplitMix64. Bounded integers use rejection sampling and
/// normals use Box-Muller, because the std distributions are
/// implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = 0;
    do {
      v = engine_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % bound);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = unit();
    } while (u1 <= 0.0);
    const double u2 = unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw Error("cannot draw " + std::to_string(k) + " of " + std::to_string(n) + " items");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

/// Round-half-up of a non-negative real, used wherever a quota is r*N.
inline std::size_t round_half_up(double v) {
  return static_cast<std::size_t>(std::floor(v + 0.5));
}

}  // namespace casf
