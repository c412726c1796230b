#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "percolymer/field.hpp"
#include "percolymer/lattice.hpp"

namespace percolymer {

// Explicit open/closed grid, used to build contrived environments (corridors,
// closed slices, time-reversed copies) in tests and oracles. Sites outside
// the stored box or time range take `outside_open`.
struct OpenGrid {
  int d = 1;
  std::int64_t t_lo = 0;
  std::int64_t t_hi = 0;
  Box box;
  std::vector<std::uint8_t> open;  // (t - t_lo) * box.size() + box.index_of(x)
  bool outside_open = false;

  bool is_open(std::int64_t t, const Position& x) const {
    if (t < t_lo || t > t_hi || !box.contains(x)) return outside_open;
    return open[std::size_t(t - t_lo) * box.size() + box.index_of(x)] != 0;
  }
};

// A maximal time range of an environment's splice plan. A query at (t, x)
// with t in [t_lo, t_hi] resolves to the source at (t - t_shift, x - x_shift).
struct EnvSegment {
  std::int64_t t_lo = 0;
  std::int64_t t_hi = std::numeric_limits<std::int64_t>::max();  // inclusive, max = open-ended
  std::int64_t t_shift = 0;
  Position x_shift = kOrigin;

  struct FieldSource {
    UniformField field;
    double open_prob;
  };
  std::variant<std::shared_ptr<const OpenGrid>, FieldSource> source;
};

// Deterministic, lazily evaluated time-space environment. A site (t, x) is
// open iff the resolved field value is < open_prob (so openness is increasing
// in p), or per the stored grid. The splice plan partitions time [0, inf)
// with no gaps or overlaps; with an empty splice history the base field is
// the source everywhere.
//
// Queries are restricted to |x|_inf <= spatial_window and t >= 0; violations
// throw rather than wrap. All queries are read-only and thread-safe.
class Environment {
 public:
  Environment(const UniformField& field, double open_prob, std::int64_t spatial_window);

  static Environment from_grid(std::shared_ptr<const OpenGrid> grid, std::int64_t spatial_window);

  bool is_open(std::int64_t t, const Position& x) const;
  bool is_open(const LatticePoint& p) const { return is_open(p.t, p.x); }

  int dim() const { return d_; }
  std::int64_t spatial_window() const { return window_; }

  // Threshold of the base (earliest) field source; -1 for grid-backed plans.
  double open_prob() const;

  Environment with_window(std::int64_t w) const;

  // Time-space translation: result(t, x) = (*this)(t + dt, x + dx). The
  // caller guarantees dt keeps all queried source times nonnegative.
  Environment shifted(std::int64_t dt, const Position& dx) const;

  const std::vector<EnvSegment>& plan() const { return plan_; }

 private:
  Environment() = default;
  friend Environment splice(const Environment&, const Environment&, std::int64_t);
  friend Environment splice_slab(const Environment&, const Environment&, const Environment&,
                                 std::int64_t, std::int64_t);

  int d_ = 1;
  std::int64_t window_ = 0;
  std::vector<EnvSegment> plan_;
};

// [b, e]_k: sites at times <= k read from b, times > k read from e with times
// shifted down by k (so (k+1, x) reads e at (1, x)).
Environment splice(const Environment& b, const Environment& e, std::int64_t k);

// [b, sl, e]_{k,l}: three segments; times in (k, l] read the slab sl at
// (t - k, x), times > l read e at (t - l, x). l == k degenerates to splice.
Environment splice_slab(const Environment& b, const Environment& sl, const Environment& e,
                        std::int64_t k, std::int64_t l);

// Monotone coupling through a shared field: for p <= q, every site open in
// the p-environment is open in the q-environment.
std::pair<Environment, Environment> coupled_pair(const UniformField& field, double p, double q,
                                                 std::int64_t spatial_window);

// Restriction of an environment to the slices [t_lo, t_hi]; queries outside
// the range are errors. Carries the information structure for conditional
// resampling.
class EnvironmentWindow {
 public:
  EnvironmentWindow(Environment env, std::int64_t t_lo, std::int64_t t_hi);

  bool is_open(std::int64_t t, const Position& x) const;

  const Environment& env() const { return env_; }
  std::int64_t t_lo() const { return t_lo_; }
  std::int64_t t_hi() const { return t_hi_; }

 private:
  Environment env_;
  std::int64_t t_lo_;
  std::int64_t t_hi_;
};

}  // namespace percolymer
