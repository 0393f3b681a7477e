#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

namespace dq {

// FNV-1a, 64-bit.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

// SplitMix64: a tiny counter-friendly generator. Satisfies
// UniformRandomBitGenerator so it plugs into <random> distributions.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Deterministic child seed for (parent, stream, counter); used so that every
// event/cell draws from its own stream regardless of execution order.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream, std::uint64_t counter = 0);

}  // namespace dq
