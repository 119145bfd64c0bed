#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace icebench {

// Counter-based randomness: every draw site derives its own key from
// (seed, stable identifiers, counter), so results never depend on the order
// in which scenes or workers happen to run.

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = kFnvOffset;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t derive_key(std::initializer_list<uint64_t> parts) {
  uint64_t k = 0x6a09e667f3bcc908ull;
  for (uint64_t p : parts) k = mix64(k ^ p);
  return k;
}

// Deterministic value-type stream seeded by a derived key (SplitMix64 core).
class RngStream {
 public:
  explicit RngStream(uint64_t key) : state_(key) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform in [0, n); Lemire multiply with rejection.
  uint64_t next_below(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<uint64_t>(m);
    if (low < n) {
      uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Standard normal, Box-Muller; second value of each pair is cached.
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] so log stays finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Deterministic in-place Fisher-Yates driven by one stream.
template <typename Vec>
void keyed_shuffle(Vec& v, uint64_t key) {
  RngStream rng(key);
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace icebench
