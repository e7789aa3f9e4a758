#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace semcom {

// Named-stream PRNG.
//
// Every random draw in the project comes from an Rng whose seed is derived
// from a master seed and a stream name:
//
//   stream_seed(master, name) = mix64(master ^ mix64(fnv1a64(name)))
//   stream_seed(master, index) = mix64(master ^ mix64(index + 0x9E3779B97F4A7C15))
//
// mix64 is the SplitMix64 finalizer (constants 0xBF58476D1CE4E5B9,
// 0x94D049BB133111EB, shifts 30/27/31). The generator itself is SplitMix64
// (increment 0x9E3779B97F4A7C15). Uniform doubles take the top 53 bits;
// Gaussians use the Marsaglia polar method with one cached spare.
std::uint64_t mix64(std::uint64_t z) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t basis) noexcept;
std::uint64_t stream_seed(std::uint64_t master, std::string_view name) noexcept;
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}
  Rng(std::uint64_t master, std::string_view name) noexcept : state_(stream_seed(master, name)) {}

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;
  double sign() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }

  // Derives an independent child stream without advancing this one.
  Rng fork(std::string_view name) const noexcept { return Rng(stream_seed(state_, name)); }

  // In-place Fisher-Yates shuffle (portable: does not depend on std::shuffle).
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace semcom
