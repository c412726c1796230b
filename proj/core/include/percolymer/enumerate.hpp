#pragma once

#include <cstdint>
#include <vector>

#include "percolymer/polymer.hpp"

namespace percolymer {

// Brute-force path enumeration. Test oracle for the transfer-slice
// recursions; never used on the estimation paths.

struct EnumeratedPath {
  Path path;
  std::int64_t energy = 0;
};

struct EnumerationResult {
  double log_partition = 0.0;  // log sum over all paths of e^{-beta H}, -inf if 0
  BigInt open_paths = 0;       // paths with zero energy
  BigInt total_paths = 0;
  std::vector<EnumeratedPath> paths;  // populated only when keep_paths
};

EnumerationResult enumerate_paths(const Environment& env, ExtendedBeta beta, std::int64_t n,
                                  const LatticePoint& start = {}, bool keep_paths = false,
                                  std::int64_t max_paths = 1'000'000);

}  // namespace percolymer
