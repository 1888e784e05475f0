#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace swinlstm {

// Deterministic splitmix64 generator. Every consumer derives its own stream
// from one master seed via a name or index, so the draw order in one stream
// never perturbs another and any stream can be reproduced in isolation.
// The full generator state is a single u64, which makes persistence trivial.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : key_(state), state_(state) {}

  static Rng from_seed(std::uint64_t seed, std::string_view stream) {
    return Rng(mix(seed, fnv1a(stream)));
  }

  // Derived from the construction key, not the advancing state, so the
  // result is independent of how many draws happened on this stream.
  Rng substream(std::uint64_t index) const {
    return Rng(mix(key_, index + 0x9E3779B97F4A7C15ull));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without caching the second variate, so one draw consumes a
  // fixed number of generator steps.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Rejection sampling; bounds are absolute values, not multiples of stddev.
  double trunc_normal(double stddev, double lo, double hi) {
    for (;;) {
      double v = normal() * stddev;
      if (v >= lo && v <= hi) return v;
    }
  }

  // Uniform in [0, n). Modulo bias is irrelevant for the small n used here.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }
  std::uint64_t key() const { return key_; }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b * 0xD6E8FEB86659FD93ull + 0x2545F4914F6CDD1Dull);
    s += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  std::uint64_t key_;
  std::uint64_t state_;
};

}  // namespace swinlstm
