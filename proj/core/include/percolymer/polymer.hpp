#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <vector>

#include "percolymer/beta.hpp"
#include "percolymer/env.hpp"
#include "percolymer/errors.hpp"
#include "percolymer/lattice.hpp"

namespace percolymer {

using BigInt = boost::multiprecision::cpp_int;

// log of a positive big integer, via the top bits; exact enough (1 ulp-ish)
// for cross-checking log-space results.
double log_big(const BigInt& v);

// A nearest-neighbor time-space path: positions[i] sits at time
// start_time + i, consecutive positions at l1 distance <= 1.
struct Path {
  std::int64_t start_time = 0;
  std::vector<Position> positions;

  std::int64_t end_time() const { return start_time + std::int64_t(positions.size()) - 1; }
  const Position& at(std::int64_t t) const { return positions.at(std::size_t(t - start_time)); }
  void validate_steps() const;
};

// Number of closed sites the path visits at times in (window.after,
// window.upto]. The full-energy case is window = (start, end]: the initial
// site never counts.
std::int64_t path_energy(const Environment& env, const Path& path, TimeWindow window);

// Caps for the transfer-slice recursions: a hard error, never silent
// truncation.
struct DpLimits {
  std::int64_t max_cell_updates = 100'000'000;
};

// Per-time-slice weights over the reachable cone's bounding box; either log
// space (V = double, -inf allowed) or exact counts (V = BigInt).
template <class V>
struct SliceWeights {
  std::int64_t t = 0;
  Box support;
  std::vector<V> values;

  const V& at(const Position& x) const { return values[support.index_of(x)]; }
};

using LogSliceWeights = SliceWeights<double>;
using ExactSliceWeights = SliceWeights<BigInt>;

// Forward log-space recursion from a single start: returns the slice at time
// n of weights W_t(y) = factor(t, y) * sum_{|x-y|_1 <= 1} W_{t-1}(x), with
// factor e^{-beta 1{closed}} (or the open indicator at beta = inf),
// stabilized by per-slice max subtraction.
LogSliceWeights forward_log_slice(const Environment& env, ExtendedBeta beta, std::int64_t from_t,
                                  const Position& from_x, std::int64_t to_t,
                                  const DpLimits& limits = {});

// Exact open-path counts N_{from;t,y} on the slice at to_t.
ExactSliceWeights forward_count_slice(const Environment& env, std::int64_t from_t,
                                      const Position& from_x, std::int64_t to_t,
                                      const DpLimits& limits = {});

// Exact counts of open paths from (t, y) to (to_t, Z^d), computed backward.
ExactSliceWeights backward_count_slice(const Environment& env, std::int64_t to_t, std::int64_t t,
                                       const DpLimits& limits = {});

// log Z_n^beta for paths of length n from `start`; -inf iff Z = 0 (possible
// only at beta = inf). Note Z is unnormalized: Z_n^0 = (2d+1)^n, so growth
// rates carry a log(2d+1) offset relative to the averaged convention.
double partition_log(const Environment& env, ExtendedBeta beta, std::int64_t n,
                     const LatticePoint& start = {}, const DpLimits& limits = {});

// Exact N_n: the number of open paths of length n from `start`.
BigInt count_paths_exact(const Environment& env, std::int64_t n, const LatticePoint& start = {},
                         const DpLimits& limits = {});

// Endpoint restriction for the partial partition sums.
struct TargetSet {
  bool all = true;
  std::vector<Position> points;

  static TargetSet everything() { return {}; }
  static TargetSet of(std::vector<Position> pts) { return {false, std::move(pts)}; }
};

// log Z^beta_{m,x;n,targets}; the initial site's openness is not required.
double restricted_partition_log(const Environment& env, ExtendedBeta beta, std::int64_t m,
                                const Position& x, std::int64_t n, const TargetSet& targets,
                                const DpLimits& limits = {});

// log Z~: log Z_n^beta when (0,0) <-> (n, Z^d), else 0. At beta = inf this is
// the regularized open-path count log N~_n.
double regularized_log(const Environment& env, ExtendedBeta beta, std::int64_t n,
                       const DpLimits& limits = {});

// x*: endpoint maximizing the exact open-path count N_{0,0;m,x}; ties broken
// toward the lexicographically smallest coordinate vector. Requires
// (0,0) <-> (m, Z^d).
Position argmax_endpoint(const Environment& env, std::int64_t m, const DpLimits& limits = {});

struct MidpointArgmax {
  Position x = kOrigin;
  BigInt incoming;   // N_{0,0;n,x}
  BigInt outgoing;   // N_{n,x;2n,Z^d}
  bool all_zero = false;
};

// x**: midpoint maximizing N_{0,0;n,x} * N_{n,x;2n,Z^d}, lexicographic
// tie-break; all_zero set when no open path crosses time n at all.
MidpointArgmax argmax_midpoint(const Environment& env, std::int64_t n, const DpLimits& limits = {});

}  // namespace percolymer
