#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "percolymer/env.hpp"
#include "percolymer/lattice.hpp"
#include "percolymer/perco.hpp"
#include "percolymer/polymer.hpp"

namespace percolymer {

// Scales for the coupling events. The asymptotic default is
// ell = floor((log n)^2) with slab length ell^4; at desk scales that choice
// degenerates (ell^2 > n already for n <= 5000), so every experiment can pin
// ell explicitly.
struct ScaleParams {
  std::int64_t n = 0;
  std::int64_t ell = 1;
  std::int64_t slab_len = 1;

  static ScaleParams for_length(std::int64_t n);
  static ScaleParams with_ell(std::int64_t n, std::int64_t ell);

  std::int64_t ell2() const { return ell * ell; }
  void validate() const;
};

// How goodness G_k^{t,x} is decided: estimated survival margin against the
// threshold 1 - e^{-c k}. The constant c is a knob (the theory only proves
// one exists); the default is one fifth of the finite-cluster decay rate
// fitted at d=1, p=0.8 (slope -1.35, see the decay experiment). Margins
// within `near_band` of the threshold flag the report.
struct MarginConfig {
  double c = 0.27;
  double very_good_scale = 4.0;  // threshold preset for the "very good" variant
  std::int64_t inner_samples = 160;
  std::int64_t horizon_pad = 120;  // survival proxy horizon beyond the frozen window
  double near_band = 0.05;
  std::uint64_t seed = 0;
};

struct GoodPoint {
  bool good = false;
  bool near = false;
  double margin = 0.0;
  double threshold = 0.0;
};

// Single goodness test at depth k (forward: survival given F_[t, t+k];
// backward: reachability given F_[t-k, t]). Deterministic in
// (cfg.seed, t, x, depth, backward); the test oracles reuse it so that the
// Monte Carlo classification is shared and only the path quantifiers differ.
GoodPoint good_point(const Environment& env, std::int64_t t, const Position& x,
                     std::int64_t depth, const MarginConfig& cfg, bool backward = false,
                     bool very_good = false);

// G_{j,j+1}: good at both depths.
GoodPoint good_point_pair(const Environment& env, std::int64_t t, const Position& x,
                          std::int64_t j, const MarginConfig& cfg, bool backward = false);

struct RepairWitness {
  Path original;
  Path repaired;
  std::int64_t original_energy = 0;
  std::int64_t repaired_energy = 0;
};

struct EventReport {
  std::string event;
  bool holds = false;
  bool suffix_void = false;
  bool near_threshold = false;
  bool caps_hit = false;
  std::string mode = "dp-exact";
  std::optional<Path> failing_path;
  std::vector<RepairWitness> repairs;
  std::string note;
};

// Anticipating connection: every open path (0,0) -> (k, Z^d) passes a good
// pair G_{j,j+1} at some probe offset j in [ell^2, 2 ell^2 ^ k]. The path
// quantifier is resolved exactly by a masked reachability recursion; a
// failing open path is reported when one exists.
EventReport check_a_conn(const Environment& env, const ScaleParams& scale, std::int64_t k,
                         const MarginConfig& cfg);

// Backward dichotomy: every x in [-k-ell^2, k+ell^2]^d is either unreachable
// from the full slice at k+1 or backward-good at depth ell^2 - 1.
EventReport check_a_bar(const Environment& env, const ScaleParams& scale, std::int64_t k,
                        const MarginConfig& cfg);

// Slab repair at zero temperature: every open path of [b,e]_k can be
// rerouted through the inserted slab with pinned prefix and (ell^4-shifted)
// suffix. Search is a constrained slice recursion over the pinned endpoints,
// not path enumeration; up to witness_cap (original, repaired) pairs are
// returned for independent re-verification.
EventReport check_a_repair(const Environment& b, const Environment& sl, const Environment& e,
                           const ScaleParams& scale, std::int64_t k, std::size_t witness_cap = 8,
                           const DpLimits& limits = {});

// Positive-temperature variants quantify over all paths, with the
// energy-threshold alternative: a path dodging every good probe must burn at
// least ell closed sites in the probe band or sit next to a displaced good
// point. For k < 2 ell^2 the second alternative is dropped.
EventReport check_b_conn(const Environment& env, const ScaleParams& scale, std::int64_t k,
                         const MarginConfig& cfg);

EventReport check_b_bar(const Environment& env, const ScaleParams& scale, std::int64_t k,
                        const MarginConfig& cfg);

// Slab repair dominating the energy: every path of [b,e]_k maps to a pinned
// path of the slab environment with no larger energy. Decided exactly by
// min-cost slice recursions from every pinned prefix endpoint.
EventReport check_b_repair(const Environment& b, const Environment& sl, const Environment& e,
                           const ScaleParams& scale, std::int64_t k, std::size_t witness_cap = 8,
                           std::uint64_t witness_seed = 0, const DpLimits& limits = {});

// Re-verifies a repair witness directly against the defining constraints
// (start, steps, prefix/suffix pinning, openness or the energy inequality),
// using only raw site queries. Returns an empty string when valid, else the
// violated clause.
std::string verify_repair_witness(const Environment& b, const Environment& sl,
                                  const Environment& e, const ScaleParams& scale, std::int64_t k,
                                  const RepairWitness& w, bool energy_variant);

struct MartingaleDiffSample {
  std::int64_t k = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::int64_t outer_samples = 0;
  std::uint64_t seed = 0;
};

// Slab-coupled martingale difference at zero temperature:
// Delta_k = E^{sl,e}[ log N~_n([b,e]_k) - log N~_n([b,sl,e]_{k-1,k+slab}) ],
// averaged over fresh (sl, e) pairs with seeds derived from `seed`.
MartingaleDiffSample martingale_diff_estimate(const Environment& b, const ScaleParams& scale,
                                              std::int64_t k, std::int64_t outer_samples,
                                              std::uint64_t seed, int threads = 0);

}  // namespace percolymer
