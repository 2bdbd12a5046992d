#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace mfpinn {

// SplitMix64 (Steele, Lea, Flood 2014). Used for seed expansion and for
// deriving independent sub-stream seeds from one master seed.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

// xoshiro256** 1.0 (Blackman, Vigna), seeded through SplitMix64.
// All experiment randomness goes through this generator so results are
// reproducible bit-for-bit across platforms and standard libraries.
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0,1): midpoints of the 2^53 lattice.
  double uniform_open01() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n). Rejection method, n >= 1.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t min = (-n) % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x < min);
    return x % n;
  }

  // Fisher-Yates; shuffles the whole vector in place.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

// Deterministic sub-seed: one master seed fans out to independent streams
// (network init, point sampling, minibatch shuffling, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t role) {
  SplitMix64 sm(master ^ (0x9E3779B97F4A7C15ULL * (role + 1)));
  sm.next();
  return sm.next();
}

}  // namespace mfpinn
