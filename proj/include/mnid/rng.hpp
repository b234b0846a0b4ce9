#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace mnid {

// Counter-based generator: the i-th output of a stream with key k is
// splitmix64_mix(k + (i + 1) * 0x9E3779B97F4A7C15). Every draw the engine
// makes goes through this type, so outputs are identical on every platform
// (no std:: distributions, whose algorithms are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  // Independent stream for a named consumer, e.g. stream(seed, "kmeans", 3).
  static Rng stream(std::uint64_t seed, std::string_view name,
                    std::uint64_t index = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform integer on [0, n); n must be > 0. Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace mnid
