#pragma once

#include <cstdint>
#include <random>

namespace mresgld {

// Seeded generator that can be split into statistically independent child
// streams. A child is keyed by (seed, stream path), so the same split sequence
// always reproduces the same draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x6d72u};
    engine_.seed(seq);
  }

  // Child stream; splitting the same parent with the same id twice yields
  // identical children.
  Rng split(std::uint64_t id) const {
    return Rng(seed_, stream_ * 0x9E3779B97F4A7C15ull + id + 1);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mresgld
