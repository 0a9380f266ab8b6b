#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace rpcaf {

// Counter-based pseudo-random generator (splitmix64): the state walks a fixed
// odd stride and each output is a finalizer hash of the state. All random
// draws in the library come from this generator so that a seed pins every
// result bit-for-bit. The real-valued mappings are documented in README.md.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1), 53 random mantissa bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// Standard normal via Box-Muller; consumes two uniforms per pair and
  /// caches the second value.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the logarithm finite.
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t rem = (UINT64_MAX % n + 1) % n;  // 2^64 mod n
    std::uint64_t x = next();
    while (rem != 0 && x >= UINT64_MAX - rem + 1) x = next();
    return x % n;
  }

  /// k distinct indices from [0, n), by partial Fisher-Yates over 0..n-1.
  std::vector<int> sample_without_replacement(int n, int k,
                                              std::vector<int>& scratch) {
    scratch.resize(n);
    for (int i = 0; i < n; ++i) scratch[i] = i;
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(scratch[i], scratch[j]);
      out[i] = scratch[i];
    }
    return out;
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Order-sensitive seed derivation: folds each part through one splitmix64
/// round. Used to give every experiment cell its own independent stream.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8A5CD789635D2DFFull;
  for (std::uint64_t p : parts) {
    h = mix64(h + 0x9E3779B97F4A7C15ull + p);
  }
  return h;
}

}  // namespace rpcaf
