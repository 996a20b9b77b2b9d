#pragma once

#include <cmath>
#include <cstdint>

namespace percolab {

// 64-bit finalizer used both as a seeding chain and as a stateless hash.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// xoshiro256++ with explicitly specified seeding and output conversions, so a
// given (seed, stream) pair replays the same draws on every platform and under
// any thread count. Each Monte Carlo replica owns one stream; nothing is
// shared between streams.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t chain = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    for (auto& word : s_) word = splitmix64(chain);
    bool all_zero = (s_[0] | s_[1] | s_[2] | s_[3]) == 0;
    if (all_zero) s_[0] = 1;  // unreachable in practice, keeps the state valid
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); never returns 0 or 1, so logarithms
  // and strict threshold comparisons are safe.
  double next_unit() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Index uniform on {0, ..., n-1} by rejection; exact, no modulo bias.
  std::uint64_t next_index(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller written out explicitly (the library
  // distributions are implementation-defined and would break replay).
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace percolab
