#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pmv/types.hpp"

namespace pmv {

// Purpose label of a random stream. Streams with distinct (seed, id, salt)
// triples are statistically independent; identical triples replay the
// identical value sequence.
enum class Stream : std::uint32_t {
  kInit = 1,
  kDropout = 2,
  kSampler = 3,
  kData = 4,
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, Stream id, std::uint64_t salt = 0)
      : engine_(mix(seed, static_cast<std::uint64_t>(id), salt)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 significant bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard Gaussian via Box-Muller; one spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double angle = 6.28318530717958647692 * v;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  // Unbiased integer in [0, bound); bound must be positive.
  Index uniform_index(Index bound) {
    const auto b = static_cast<std::uint64_t>(bound);
    const std::uint64_t threshold = (-b) % b;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<Index>(r % b);
    }
  }

  bool bernoulli(double rate) { return uniform() < rate; }

  // Xavier-uniform draw in +/- sqrt(6 / (fan_in + fan_out)).
  double xavier(Index fan_in, Index fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return (2.0 * uniform() - 1.0) * bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (Index i = static_cast<Index>(items.size()) - 1; i > 0; --i) {
      const Index j = uniform_index(i + 1);
      std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t id, std::uint64_t salt) {
    // splitmix64 over the three components; decorrelates nearby seeds.
    std::uint64_t z = seed;
    for (std::uint64_t w : {id, salt}) {
      z += 0x9e3779b97f4a7c15ull + (w << 17);
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      z = z ^ (z >> 31);
    }
    return z;
  }

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pmv
