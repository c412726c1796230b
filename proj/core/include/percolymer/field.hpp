#pragma once

#include <cstdint>
#include <string_view>

#include "percolymer/lattice.hpp"

namespace percolymer {

// 64-bit finalizer with full avalanche (the murmur3/splitmix tail). Used both
// for the site values and for seed derivation.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

// Stable seed-derivation rule, part of the public interface:
//   child_seed = hash64(parent_seed, role_string, replicate_index).
// Every derived stream (slab environments, per-sample environments, nested
// resampling) goes through this; it must not change across versions.
std::uint64_t child_seed(std::uint64_t parent, std::string_view role, std::uint64_t index);

// Counter-based uniform pseudo-random field: value(t, x) in [0, 1) is a pure
// function of (seed, t, x). Distinct sites give statistically independent
// uniforms, so spliced and resampled environments stay reproducible and any
// number of threads can read concurrently.
class UniformField {
 public:
  UniformField(std::uint64_t seed, int d) : seed_(seed), d_(d) { require_dim(d); }

  std::uint64_t bits(std::int64_t t, const Position& x) const {
    std::uint64_t h = mix64(seed_ ^ 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ std::uint64_t(t));
    for (int i = 0; i < d_; ++i) h = mix64(h ^ std::uint64_t(std::int64_t(x[i])));
    return h;
  }

  // 53-bit mantissa, strictly below 1.
  double value(std::int64_t t, const Position& x) const {
    return double(bits(t, x) >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed() const { return seed_; }
  int dim() const { return d_; }

 private:
  std::uint64_t seed_;
  int d_;
};

}  // namespace percolymer
