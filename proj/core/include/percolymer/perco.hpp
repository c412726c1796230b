#pragma once

#include <cstdint>
#include <vector>

#include "percolymer/env.hpp"
#include "percolymer/lattice.hpp"

namespace percolymer {

// Packed set of positions at a fixed time; the state of the oriented
// percolation front. Empty sets are absorbing under forward evolution.
struct ReachSet {
  std::int64_t t = 0;
  Box support;
  std::vector<std::uint8_t> bits;

  static ReachSet of(int d, std::int64_t t, const std::vector<Position>& pts);

  bool contains(const Position& p) const {
    return support.contains(p) && bits[support.index_of(p)] != 0;
  }
  bool any() const;
  std::int64_t count() const;
  std::vector<Position> positions() const;
};

// R_s = A, R_{r+1} = { y open at r+1 : exists x in R_r with |x-y|_1 <= 1 };
// returns R_t. Initial sites need not be open. The front is confined to the
// environment's spatial window.
ReachSet reach_forward(const Environment& env, std::int64_t s, const std::vector<Position>& A,
                       std::int64_t t);
ReachSet evolve_front(const Environment& env, const ReachSet& front, std::int64_t t);

// (s, A) <-> (t, B): some open path starts in A at time s and ends in B at
// time t. For s == t this is plain intersection.
bool connected(const Environment& env, std::int64_t s, const std::vector<Position>& A,
               std::int64_t t, const std::vector<Position>& B);

// Set of x at time s with (s, x) <-> (t, B). Keeps the forward convention on
// openness: the site with the smallest time may be closed, the largest must
// be open, so B should consist of sites open at t (the caller filters).
ReachSet reach_backward(const Environment& env, std::int64_t t, const std::vector<Position>& B,
                        std::int64_t s);

// Cone speed for the coupled-zone window; v <= 1/d keeps the window
// reachable in fully open environments. Default v = 1/(2d).
struct CoupledZoneParams {
  double v = 0.5;
  static CoupledZoneParams for_dim(int d) { return {1.0 / (2.0 * d)}; }
};

// C_k^{n,x}: (n,x) <-> (n+k, Z^d), and every y in x + [-kv, kv]^d reachable
// from the full slice at n is already reachable from x. The Z^d source is
// truncated to x + [-2k, 2k]^d, which is lossless: any source reaching the
// window within k steps lies within l1 distance k of it.
bool coupled_zone_check(const Environment& env, std::int64_t n, const Position& x, std::int64_t k,
                        const CoupledZoneParams& params);

// Mirror image for the backward percolation.
bool coupled_zone_check_backward(const Environment& env, std::int64_t n, const Position& x,
                                 std::int64_t k, const CoupledZoneParams& params);

struct SurvivalEstimate {
  int d = 1;
  double p = 0.0;
  std::int64_t horizon = 0;
  std::int64_t buffer = 0;
  std::int64_t samples = 0;
  std::int64_t hits = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;  // binomial standard error
  std::uint64_t seed = 0;
};

// Monte Carlo estimate of P((0,0) <-> (T, Z^d)) at T = horizon + buffer; a
// positive buffer makes the event a tighter finite proxy for survival, with
// error exponentially small in the horizon.
SurvivalEstimate survival_estimate(int d, double p, std::int64_t horizon, std::int64_t buffer,
                                   std::int64_t samples, std::uint64_t seed, int threads = 0);

struct MarginEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::int64_t inner_samples = 0;
};

// Nested Monte Carlo for the good-event margin: freeze the window's slices,
// resample everything after its top, and estimate the conditional probability
// that the window's base point stays connected for `horizon` more steps.
// Deterministic in (window, x, horizon, seed).
MarginEstimate conditional_survival_margin(const EnvironmentWindow& window, const Position& x,
                                           std::int64_t horizon, std::int64_t inner_samples,
                                           std::uint64_t seed);

// Backward twin: freeze [t_lo, t_hi], resample times < t_lo, estimate the
// conditional probability that (t_hi, x) is reached from `horizon` steps in
// the past (clamped at time 0).
MarginEstimate conditional_backward_margin(const EnvironmentWindow& window, const Position& x,
                                           std::int64_t horizon, std::int64_t inner_samples,
                                           std::uint64_t seed);

// Bisection on p of the finite-size survival indicator: smallest p whose
// horizon-T survival estimate crosses `survival_threshold`, to resolution
// tol. A finite-size proxy for the critical parameter, not a rigorous bound.
double critical_estimate(int d, std::int64_t horizon, std::int64_t samples, double tol,
                         std::uint64_t seed, double survival_threshold = 0.5, int threads = 0);

}  // namespace percolymer
