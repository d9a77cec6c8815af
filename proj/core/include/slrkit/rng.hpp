#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace slrkit {

// All randomness in the toolkit flows through explicitly seeded mt19937_64
// streams. Draw helpers are hand-rolled so results are identical across
// standard library implementations (std::uniform_*_distribution and
// std::shuffle are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derive an independent stream from a base seed and stream ids, so that
  // e.g. (run seed, epoch) or (run seed, class index) never collide.
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = seed;
    z = mix(z ^ (0x9e3779b97f4a7c15ULL + a));
    z = mix(z ^ (0xbf58476d1ce4e5b9ULL + b));
    return Rng(z);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n) without modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates; deterministic for a given stream state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slrkit
