#include "percolymer/events.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "percolymer/threading.hpp"

namespace percolymer {

ScaleParams ScaleParams::for_length(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("ScaleParams: n must be >= 1");
  const double l = std::log(double(n));
  const std::int64_t ell = std::max<std::int64_t>(1, std::int64_t(std::floor(l * l)));
  return with_ell(n, ell);
}

ScaleParams ScaleParams::with_ell(std::int64_t n, std::int64_t ell) {
  ScaleParams s;
  s.n = n;
  s.ell = ell;
  s.slab_len = ell * ell * ell * ell;
  s.validate();
  return s;
}

void ScaleParams::validate() const {
  if (n < 1 || ell < 1 || slab_len < 1)
    throw std::invalid_argument("ScaleParams: n, ell, slab_len must be >= 1");
}

namespace {

constexpr std::int32_t kUnreach = std::numeric_limits<std::int32_t>::max() / 4;

std::uint64_t site_seed(std::uint64_t seed, const char* tag, std::int64_t t, const Position& x,
                        std::int64_t depth) {
  std::uint64_t h = child_seed(seed, tag, std::uint64_t(t));
  h = mix64(h ^ std::uint64_t(depth));
  for (int i = 0; i < kMaxDim; ++i) h = mix64(h ^ std::uint64_t(std::int64_t(x[i])));
  return h;
}

std::int64_t l1_dist_to_box(const Position& p, const Box& b) {
  std::int64_t s = 0;
  for (int i = 0; i < kMaxDim; ++i) {
    if (p[i] < b.lo[i]) s += b.lo[i] - p[i];
    if (p[i] > b.hi[i]) s += p[i] - b.hi[i];
  }
  return s;
}

// Path with steps |delta|_1 <= 1 from (t_from, from) to (t_to, to); requires
// l1 distance <= elapsed time. Moves greedily, then stays put.
Path free_path(const Position& from, std::int64_t t_from, const Position& to, std::int64_t t_to) {
  if (l1_dist(from, to) > t_to - t_from) throw std::logic_error("free_path: target out of cone");
  Path p;
  p.start_time = t_from;
  p.positions.push_back(from);
  Position cur = from;
  for (std::int64_t t = t_from + 1; t <= t_to; ++t) {
    const std::int64_t remaining = t_to - t;
    if (l1_dist(cur, to) > remaining) {
      for (int i = 0; i < kMaxDim; ++i) {
        if (cur[i] < to[i]) {
          ++cur[i];
          break;
        }
        if (cur[i] > to[i]) {
          --cur[i];
          break;
        }
      }
    }
    p.positions.push_back(cur);
  }
  return p;
}

// Open-front evolution keeping every slice, for witness backtraces. An
// optional mask removes positions after the front reaches each time.
struct FrontHistory {
  std::vector<ReachSet> slices;

  const ReachSet& at_time(std::int64_t t) const {
    return slices.at(std::size_t(t - slices.front().t));
  }
};

FrontHistory run_front(const Environment& env, ReachSet start, std::int64_t t_end,
                       const std::function<void(std::int64_t, ReachSet&)>& mask) {
  FrontHistory h;
  if (mask) mask(start.t, start);
  h.slices.push_back(std::move(start));
  while (h.slices.back().t < t_end) {
    ReachSet next = evolve_front(env, h.slices.back(), h.slices.back().t + 1);
    if (mask) mask(next.t, next);
    h.slices.push_back(std::move(next));
  }
  return h;
}

// Lexicographically-first open path through a front history ending at `end`.
Path front_backtrace(const FrontHistory& hist, const Position& end) {
  std::vector<Position> rev{end};
  const auto offs = StepOffsets::for_dim(hist.slices.front().support.d);
  for (std::size_t i = hist.slices.size() - 1; i > 0; --i) {
    const ReachSet& prev = hist.slices[i - 1];
    Position chosen{};
    bool found = false;
    std::vector<Position> cands;
    for (int o = 0; o < offs.count; ++o) cands.push_back(shifted(rev.back(), offs.off[o]));
    std::sort(cands.begin(), cands.end());
    for (const auto& c : cands) {
      if (prev.contains(c)) {
        chosen = c;
        found = true;
        break;
      }
    }
    if (!found) throw std::logic_error("front_backtrace: broken front chain");
    rev.push_back(chosen);
  }
  Path p;
  p.start_time = hist.slices.front().t;
  p.positions.assign(rev.rbegin(), rev.rend());
  return p;
}

// Unconstrained-step evolution (any site, open or closed), used by the
// positive-temperature quantifiers.
ReachSet free_step(const ReachSet& cur, std::int64_t cap, int d) {
  const auto offs = StepOffsets::for_dim(d);
  ReachSet next;
  next.t = cur.t + 1;
  next.support = cur.support.expanded(1, cap);
  next.bits.assign(next.support.size(), 0);
  next.support.for_each([&](const Position& y) {
    for (int i = 0; i < offs.count; ++i) {
      if (cur.contains(shifted(y, offs.off[i]))) {
        next.bits[next.support.index_of(y)] = 1;
        return;
      }
    }
  });
  return next;
}

// Min-energy slice recursion: cost(t, y) = closed sites visited in (t0, t]
// along the cheapest unconstrained path from the sources. Masked positions
// are unreachable.
struct CostHistory {
  std::int64_t t0 = 0;
  std::vector<Box> boxes;
  std::vector<std::vector<std::int32_t>> cost;

  const std::vector<std::int32_t>& at_time(std::int64_t t) const {
    return cost.at(std::size_t(t - t0));
  }
  const Box& box_at(std::int64_t t) const { return boxes.at(std::size_t(t - t0)); }
};

CostHistory run_min_cost(const Environment& env, std::int64_t t0, const Box& init_box,
                         const std::vector<std::int32_t>& init_cost, std::int64_t t_end,
                         const std::function<bool(std::int64_t, const Position&)>& masked,
                         std::int64_t* cell_budget) {
  const int d = env.dim();
  const std::int64_t cap = env.spatial_window();
  const auto offs = StepOffsets::for_dim(d);
  CostHistory h;
  h.t0 = t0;
  h.boxes.push_back(init_box);
  h.cost.push_back(init_cost);
  for (std::int64_t t = t0 + 1; t <= t_end; ++t) {
    const Box& pb = h.boxes.back();
    const auto& pc = h.cost.back();
    Box nb = pb.expanded(1, cap);
    std::vector<std::int32_t> nc(nb.size(), kUnreach);
    if (cell_budget) {
      *cell_budget -= std::int64_t(nc.size());
      if (*cell_budget < 0) throw CapExceeded("slice-cell cap exceeded in repair search");
    }
    nb.for_each([&](const Position& y) {
      if (masked && masked(t, y)) return;
      std::int32_t best = kUnreach;
      for (int i = 0; i < offs.count; ++i) {
        const Position x = shifted(y, offs.off[i]);
        if (pb.contains(x)) best = std::min(best, pc[pb.index_of(x)]);
      }
      if (best >= kUnreach) return;
      nc[nb.index_of(y)] = best + (env.is_open(t, y) ? 0 : 1);
    });
    h.boxes.push_back(std::move(nb));
    h.cost.push_back(std::move(nc));
  }
  return h;
}

// Cheapest path through a cost history ending at `end`; lexicographic-first
// among optimal predecessors.
Path cost_backtrace(const Environment& env, const CostHistory& hist, const Position& end) {
  std::vector<Position> rev{end};
  const int d = env.dim();
  const auto offs = StepOffsets::for_dim(d);
  const std::int64_t t_end = hist.t0 + std::int64_t(hist.cost.size()) - 1;
  for (std::int64_t t = t_end; t > hist.t0; --t) {
    const Position y = rev.back();
    const auto& cur = hist.at_time(t);
    const auto& prev = hist.at_time(t - 1);
    const Box& cb = hist.box_at(t);
    const Box& pb = hist.box_at(t - 1);
    const std::int32_t want = cur[cb.index_of(y)] - (env.is_open(t, y) ? 0 : 1);
    std::vector<Position> cands;
    for (int o = 0; o < offs.count; ++o) cands.push_back(shifted(y, offs.off[o]));
    std::sort(cands.begin(), cands.end());
    bool found = false;
    for (const auto& c : cands) {
      if (pb.contains(c) && prev[pb.index_of(c)] == want) {
        rev.push_back(c);
        found = true;
        break;
      }
    }
    if (!found) throw std::logic_error("cost_backtrace: broken cost chain");
  }
  Path p;
  p.start_time = hist.t0;
  p.positions.assign(rev.rbegin(), rev.rend());
  return p;
}

std::vector<Position> open_sites_at(const Environment& env, std::int64_t t, std::int64_t radius) {
  std::vector<Position> out;
  Box::centered(env.dim(), kOrigin, std::min(radius, env.spatial_window()))
      .for_each([&](const Position& p) {
        if (env.is_open(t, p)) out.push_back(p);
      });
  return out;
}

}  // namespace

GoodPoint good_point(const Environment& env, std::int64_t t, const Position& x,
                     std::int64_t depth, const MarginConfig& cfg, bool backward, bool very_good) {
  if (depth < 0) throw std::invalid_argument("good_point: negative depth");
  const double c_eff = cfg.c * (very_good ? cfg.very_good_scale : 1.0);
  GoodPoint g;
  g.threshold = 1.0 - std::exp(-c_eff * double(depth));
  MarginEstimate m;
  if (!backward) {
    m = conditional_survival_margin(EnvironmentWindow(env, t, t + depth), x,
                                    depth + cfg.horizon_pad, cfg.inner_samples,
                                    site_seed(cfg.seed, "good-fwd", t, x, depth));
  } else {
    m = conditional_backward_margin(EnvironmentWindow(env, std::max<std::int64_t>(0, t - depth), t),
                                    x, depth + cfg.horizon_pad, cfg.inner_samples,
                                    site_seed(cfg.seed, "good-bwd", t, x, depth));
  }
  g.margin = m.estimate;
  g.good = m.estimate >= g.threshold;
  g.near = std::abs(m.estimate - g.threshold) < cfg.near_band;
  return g;
}

GoodPoint good_point_pair(const Environment& env, std::int64_t t, const Position& x,
                          std::int64_t j, const MarginConfig& cfg, bool backward) {
  const GoodPoint a = good_point(env, t, x, j, cfg, backward);
  const GoodPoint b = good_point(env, t, x, j + 1, cfg, backward);
  GoodPoint g;
  g.good = a.good && b.good;
  g.near = a.near || b.near;
  g.margin = std::min(a.margin, b.margin);
  g.threshold = std::max(a.threshold, b.threshold);
  return g;
}

EventReport check_a_conn(const Environment& env, const ScaleParams& scale, std::int64_t k,
                         const MarginConfig& cfg) {
  scale.validate();
  const std::int64_t l2 = scale.ell2();
  if (k < l2 || k > scale.n)
    throw std::invalid_argument("check_a_conn: requires ell^2 <= k <= n");
  EventReport rep;
  rep.event = "a_conn";
  const std::int64_t t_lo = std::max<std::int64_t>(k - 2 * l2, 0);
  const std::int64_t t_hi = k - l2;
  bool near = false;
  auto mask = [&](std::int64_t t, ReachSet& front) {
    if (t < t_lo || t > t_hi) return;
    front.support.for_each([&](const Position& x) {
      if (!front.bits[front.support.index_of(x)]) return;
      const GoodPoint g = good_point_pair(env, t, x, k - t, cfg);
      near = near || g.near;
      if (g.good) front.bits[front.support.index_of(x)] = 0;
    });
  };
  FrontHistory hist = run_front(env, ReachSet::of(env.dim(), 0, {kOrigin}), k, mask);
  rep.near_threshold = near;
  const ReachSet& last = hist.slices.back();
  if (last.any()) {
    rep.holds = false;
    rep.failing_path = front_backtrace(hist, last.positions().front());
    rep.note = "open path avoiding every good probe";
  } else {
    rep.holds = true;
  }
  return rep;
}

EventReport check_a_bar(const Environment& env, const ScaleParams& scale, std::int64_t k,
                        const MarginConfig& cfg) {
  scale.validate();
  if (k < 0) throw std::invalid_argument("check_a_bar: negative k");
  const std::int64_t l2 = scale.ell2();
  EventReport rep;
  rep.event = "a_bar";
  const Box box = Box::centered(env.dim(), kOrigin,
                                std::min(k + l2, env.spatial_window()));
  std::vector<Position> sources;
  box.expanded(l2 - 1, env.spatial_window()).for_each([&](const Position& y) {
    if (l1_dist_to_box(y, box) <= l2 - 1) sources.push_back(y);
  });
  const ReachSet reached = reach_forward(env, k + 1, sources, k + l2);
  bool near = false;
  bool holds = true;
  Position bad{};
  box.for_each([&](const Position& x) {
    if (!holds || !reached.contains(x)) return;
    const GoodPoint g = good_point(env, k + l2, x, l2 - 1, cfg, /*backward=*/true);
    near = near || g.near;
    if (!g.good) {
      holds = false;
      bad = x;
    }
  });
  rep.near_threshold = near;
  rep.holds = holds;
  if (!holds) {
    Path p;
    p.start_time = k + l2;
    p.positions = {bad};
    rep.failing_path = p;
    rep.note = "reachable point failing the backward-good dichotomy";
  }
  return rep;
}

EventReport check_a_repair(const Environment& b, const Environment& sl, const Environment& e,
                           const ScaleParams& scale, std::int64_t k, std::size_t witness_cap,
                           const DpLimits& limits) {
  scale.validate();
  const std::int64_t n = scale.n;
  const std::int64_t l2 = scale.ell2();
  const std::int64_t slab = scale.slab_len;
  if (k < 1 || k > n) throw std::invalid_argument("check_a_repair: requires 1 <= k <= n");
  EventReport rep;
  rep.event = "a_repair";

  const Environment env1 = splice(b, e, k);
  const Environment env2 = splice_slab(b, sl, e, k - 1, k + slab);
  const std::int64_t a = std::max<std::int64_t>(k - 1 - 2 * l2, 0);
  const std::int64_t t_w = k + l2;
  rep.suffix_void = k > n - slab - l2;

  FrontHistory fwd = run_front(env1, ReachSet::of(env1.dim(), 0, {kOrigin}), a, nullptr);
  const ReachSet& front_a = fwd.slices.back();
  if (!front_a.any()) {
    rep.holds = true;  // no open path at all: the quantifier is vacuous
    rep.note = "vacuous: origin disconnected before the prefix cut";
    return rep;
  }
  const std::int64_t work_estimate =
      front_a.count() * (t_w + slab - a + 2) * std::int64_t(2 * (n + slab) + 1);
  if (work_estimate > limits.max_cell_updates)
    throw CapExceeded("repair search cap exceeded; shrink n or the slab");
  const std::vector<Position> top_open = open_sites_at(env1, n, n);
  const ReachSet back_a = reach_backward(env1, n, top_open, a);
  const ReachSet back_w = rep.suffix_void ? ReachSet::of(env1.dim(), t_w, {})
                                          : reach_backward(env1, n, top_open, t_w);

  for (const Position& u : front_a.positions()) {
    if (!back_a.contains(u)) continue;  // (a, u) not on any open path to (n, Z^d)
    if (rep.suffix_void) {
      FrontHistory rf = run_front(env2, ReachSet::of(env2.dim(), a, {u}), n, nullptr);
      if (!rf.slices.back().any()) {
        rep.holds = false;
        FrontHistory full = run_front(env1, ReachSet::of(env1.dim(), a, {u}), n, nullptr);
        Path tail = front_backtrace(full, full.slices.back().positions().front());
        Path head = front_backtrace(fwd, u);
        head.positions.insert(head.positions.end(), tail.positions.begin() + 1,
                              tail.positions.end());
        rep.failing_path = head;
        rep.note = "no repair reaches (n, Z^d) from the pinned prefix";
        return rep;
      }
      if (rep.repairs.size() < witness_cap) {
        FrontHistory full = run_front(env1, ReachSet::of(env1.dim(), a, {u}), n, nullptr);
        Path tail = front_backtrace(full, full.slices.back().positions().front());
        Path head = front_backtrace(fwd, u);
        Path pi1 = head;
        pi1.positions.insert(pi1.positions.end(), tail.positions.begin() + 1,
                             tail.positions.end());
        Path mid = front_backtrace(rf, rf.slices.back().positions().front());
        Path pi2 = head;
        pi2.positions.insert(pi2.positions.end(), mid.positions.begin() + 1,
                             mid.positions.end());
        rep.repairs.push_back({pi1, pi2, 0, 0});
      } else {
        rep.caps_hit = true;
      }
      continue;
    }
    FrontHistory mid1 = run_front(env1, ReachSet::of(env1.dim(), a, {u}), t_w, nullptr);
    FrontHistory mid2 = run_front(env2, ReachSet::of(env2.dim(), a, {u}), t_w + slab, nullptr);
    const ReachSet& r1 = mid1.slices.back();
    const ReachSet& r2 = mid2.slices.back();
    for (const Position& w : r1.positions()) {
      if (!back_w.contains(w)) continue;
      if (!r2.contains(w)) {
        rep.holds = false;
        Path head = front_backtrace(fwd, u);
        Path mid = front_backtrace(mid1, w);
        FrontHistory tail_h = run_front(env1, ReachSet::of(env1.dim(), t_w, {w}), n, nullptr);
        Path tail = front_backtrace(tail_h, tail_h.slices.back().positions().front());
        head.positions.insert(head.positions.end(), mid.positions.begin() + 1,
                              mid.positions.end());
        head.positions.insert(head.positions.end(), tail.positions.begin() + 1,
                              tail.positions.end());
        rep.failing_path = head;
        rep.note = "pinned pair with no open repair across the slab";
        return rep;
      }
      if (rep.repairs.size() < witness_cap) {
        Path head = front_backtrace(fwd, u);
        Path mid = front_backtrace(mid1, w);
        FrontHistory tail_h = run_front(env1, ReachSet::of(env1.dim(), t_w, {w}), n, nullptr);
        Path tail = front_backtrace(tail_h, tail_h.slices.back().positions().front());
        Path pi1 = head;
        pi1.positions.insert(pi1.positions.end(), mid.positions.begin() + 1,
                             mid.positions.end());
        pi1.positions.insert(pi1.positions.end(), tail.positions.begin() + 1,
                             tail.positions.end());
        Path mid2_path = front_backtrace(mid2, w);
        Path pi2 = head;
        pi2.positions.insert(pi2.positions.end(), mid2_path.positions.begin() + 1,
                             mid2_path.positions.end());
        // shifted suffix: pi2(j + slab) = pi1(j) for j in [k + l2, n - slab]
        for (std::int64_t j = t_w + 1; j <= n - slab; ++j)
          pi2.positions.push_back(pi1.at(j));
        rep.repairs.push_back({pi1, pi2, 0, 0});
      } else {
        rep.caps_hit = true;
      }
    }
  }
  rep.holds = true;
  return rep;
}

EventReport check_b_conn(const Environment& env, const ScaleParams& scale, std::int64_t k,
                         const MarginConfig& cfg) {
  scale.validate();
  const std::int64_t l2 = scale.ell2();
  const std::int64_t ell = scale.ell;
  if (k < l2 || k > scale.n)
    throw std::invalid_argument("check_b_conn: requires ell^2 <= k <= n");
  EventReport rep;
  rep.event = "b_conn";
  const std::int64_t t0 = std::max<std::int64_t>(k - 2 * l2, 0);
  const std::int64_t t1 = k - l2;
  const bool second_active = k >= 2 * l2;
  bool near = false;

  auto probe_good = [&](std::int64_t t, const Position& x) {
    const GoodPoint g = good_point_pair(env, t, x, k - t, cfg);
    near = near || g.near;
    return g.good;
  };

  // Positions the band can start from: the free cone at t0, minus good probes.
  std::vector<Position> z_all;
  Box::centered(env.dim(), kOrigin, std::min(t0, env.spatial_window()))
      .for_each([&](const Position& z) {
        if (l1_dist(z, kOrigin) <= t0 && !probe_good(t0, z)) z_all.push_back(z);
      });

  auto band_mask = [&](std::int64_t t, const Position& y) {
    return t >= t0 && t <= t1 && probe_good(t, y);
  };

  auto fail_with = [&](const Path& band_path) {
    rep.holds = false;
    Path head = free_path(kOrigin, 0, band_path.positions.front(), t0);
    head.positions.insert(head.positions.end(), band_path.positions.begin() + 1,
                          band_path.positions.end());
    const Position last = head.positions.back();
    for (std::int64_t t = t1 + 1; t <= scale.n; ++t) head.positions.push_back(last);
    rep.failing_path = head;
  };

  if (!second_active) {
    if (!z_all.empty()) {
      CostHistory hist =
          run_min_cost(env, t0, Box::hull(env.dim(), z_all),
                       [&] {
                         Box b = Box::hull(env.dim(), z_all);
                         std::vector<std::int32_t> c(b.size(), kUnreach);
                         for (const auto& z : z_all) c[b.index_of(z)] = 0;
                         return c;
                       }(),
                       t1, band_mask, nullptr);
      const auto& fin = hist.cost.back();
      const Box& fb = hist.boxes.back();
      for (std::size_t i = 0; i < fin.size(); ++i) {
        if (fin[i] < kUnreach) {
          fail_with(cost_backtrace(env, hist, fb.at(i)));
          rep.near_threshold = near;
          rep.note = "path avoiding every good probe (short-k regime)";
          return rep;
        }
      }
    }
    rep.holds = true;
    rep.near_threshold = near;
    return rep;
  }

  // Split by the displaced-good alternative at pi(k - 2 ell^2).
  std::vector<Position> z_plain, z_displaced;
  for (const auto& z : z_all) {
    bool disp = false;
    Box::centered(env.dim(), z, ell).for_each([&](const Position& x) {
      if (disp) return;
      const GoodPoint g = good_point_pair(env, k - 2 * l2 + ell, x, 2 * l2 - ell, cfg);
      near = near || g.near;
      disp = g.good;
    });
    (disp ? z_displaced : z_plain).push_back(z);
  }

  auto run_band = [&](const std::vector<Position>& sources) -> CostHistory {
    Box b = Box::hull(env.dim(), sources);
    std::vector<std::int32_t> c(b.size(), kUnreach);
    for (const auto& z : sources) c[b.index_of(z)] = 0;
    return run_min_cost(env, t0, b, c, t1, band_mask, nullptr);
  };

  if (!z_plain.empty()) {
    CostHistory hist = run_band(z_plain);
    const auto& fin = hist.cost.back();
    for (std::size_t i = 0; i < fin.size(); ++i) {
      if (fin[i] < kUnreach) {
        fail_with(cost_backtrace(env, hist, hist.boxes.back().at(i)));
        rep.near_threshold = near;
        rep.note = "probe-avoiding path with no displaced good point";
        return rep;
      }
    }
  }
  if (!z_displaced.empty()) {
    CostHistory hist = run_band(z_displaced);
    const auto& fin = hist.cost.back();
    for (std::size_t i = 0; i < fin.size(); ++i) {
      if (fin[i] < kUnreach && fin[i] < ell) {
        fail_with(cost_backtrace(env, hist, hist.boxes.back().at(i)));
        rep.near_threshold = near;
        rep.note = "probe-avoiding path below the energy threshold";
        return rep;
      }
    }
  }
  rep.holds = true;
  rep.near_threshold = near;
  return rep;
}

EventReport check_b_bar(const Environment& env, const ScaleParams& scale, std::int64_t k,
                        const MarginConfig& cfg) {
  scale.validate();
  const std::int64_t l2 = scale.ell2();
  const std::int64_t ell = scale.ell;
  if (k < 0) throw std::invalid_argument("check_b_bar: negative k");
  EventReport rep;
  rep.event = "b_bar";
  bool near = false;

  auto probe_good = [&](std::int64_t t, const Position& x) {
    // depth j - 1 at time t = k + j
    const GoodPoint g = good_point(env, t, x, t - k - 1, cfg, /*backward=*/true);
    near = near || g.near;
    return g.good;
  };

  const Box start_box =
      Box::centered(env.dim(), kOrigin, std::min(scale.n, env.spatial_window()));
  const std::int64_t t_probe0 = k + l2;
  const std::int64_t t_end = k + 2 * l2;

  // Free phase to k + ell^2, then the masked energy band.
  std::vector<Position> sources;
  start_box.expanded(l2, env.spatial_window()).for_each([&](const Position& y) {
    if (l1_dist_to_box(y, start_box) <= l2 && !probe_good(t_probe0, y)) sources.push_back(y);
  });
  if (sources.empty()) {
    rep.holds = true;
    rep.near_threshold = near;
    return rep;
  }
  auto band_mask = [&](std::int64_t t, const Position& y) {
    return t >= t_probe0 && t <= t_end && probe_good(t, y);
  };
  Box b = Box::hull(env.dim(), sources);
  std::vector<std::int32_t> c(b.size(), kUnreach);
  for (const auto& z : sources) c[b.index_of(z)] = 0;
  CostHistory hist = run_min_cost(env, t_probe0, b, c, t_end, band_mask, nullptr);

  const auto& fin = hist.cost.back();
  const Box& fb = hist.boxes.back();
  for (std::size_t i = 0; i < fin.size(); ++i) {
    if (fin[i] >= kUnreach) continue;
    const Position w = fb.at(i);
    bool disp = false;
    Box::centered(env.dim(), w, ell).for_each([&](const Position& x) {
      if (disp) return;
      const GoodPoint g =
          good_point(env, t_end - ell, x, 2 * l2 - ell - 1, cfg, /*backward=*/true);
      near = near || g.near;
      disp = g.good;
    });
    if (!disp || fin[i] < ell) {
      rep.holds = false;
      Path band_path = cost_backtrace(env, hist, w);
      // prepend the free run from the start box
      const Position first = band_path.positions.front();
      Position y0 = first;
      for (int j = 0; j < kMaxDim; ++j)
        y0[j] = std::clamp(y0[j], start_box.lo[j], start_box.hi[j]);
      Path head = free_path(y0, k, first, t_probe0);
      head.positions.insert(head.positions.end(), band_path.positions.begin() + 1,
                            band_path.positions.end());
      rep.failing_path = head;
      rep.near_threshold = near;
      rep.note = disp ? "probe-avoiding path below the energy threshold"
                      : "probe-avoiding path with no displaced good point";
      return rep;
    }
  }
  rep.holds = true;
  rep.near_threshold = near;
  return rep;
}

EventReport check_b_repair(const Environment& b, const Environment& sl, const Environment& e,
                           const ScaleParams& scale, std::int64_t k, std::size_t witness_cap,
                           std::uint64_t witness_seed, const DpLimits& limits) {
  scale.validate();
  const std::int64_t n = scale.n;
  const std::int64_t l2 = scale.ell2();
  const std::int64_t slab = scale.slab_len;
  if (k < 1 || k > n) throw std::invalid_argument("check_b_repair: requires 1 <= k <= n");
  EventReport rep;
  rep.event = "b_repair";

  const Environment env1 = splice(b, e, k);
  const Environment env2 = splice_slab(b, sl, e, k - 1, k + slab);
  const std::int64_t a = std::max<std::int64_t>(k - 1 - 2 * l2, 0);
  const std::int64_t t_w = k + l2;
  rep.suffix_void = k > n - slab - l2;
  const std::int64_t t_mid1 = rep.suffix_void ? n : t_w;
  const std::int64_t t_mid2 = rep.suffix_void ? n : t_w + slab;

  std::int64_t budget = limits.max_cell_updates;

  std::vector<Position> cone_a;
  Box::centered(env1.dim(), kOrigin, std::min(a, env1.spatial_window()))
      .for_each([&](const Position& u) {
        if (l1_dist(u, kOrigin) <= a) cone_a.push_back(u);
      });

  std::vector<std::pair<Position, Path>> failures;
  for (const auto& u : cone_a) {
    const Box ub = Box::centered(env1.dim(), u, 0);
    CostHistory h1 = run_min_cost(env1, a, ub, {0}, t_mid1, nullptr, &budget);
    CostHistory h2 = run_min_cost(env2, a, ub, {0}, t_mid2, nullptr, &budget);
    const auto& c1 = h1.cost.back();
    const Box& b1 = h1.boxes.back();
    const auto& c2 = h2.cost.back();
    const Box& b2 = h2.boxes.back();

    if (rep.suffix_void) {
      std::int32_t m1 = kUnreach, m2 = kUnreach;
      for (auto v : c1) m1 = std::min(m1, v);
      for (auto v : c2) m2 = std::min(m2, v);
      if (m2 > m1) {
        Position w{};
        bool picked = false;
        b1.for_each([&](const Position& p) {
          if (!picked && c1[b1.index_of(p)] == m1) {
            w = p;
            picked = true;
          }
        });
        rep.holds = false;
        Path band = cost_backtrace(env1, h1, w);
        Path head = free_path(kOrigin, 0, u, a);
        head.positions.insert(head.positions.end(), band.positions.begin() + 1,
                              band.positions.end());
        rep.failing_path = head;
        rep.note = "slab route costs more than the original (void suffix)";
        return rep;
      }
      continue;
    }

    bool bad = false;
    Position bad_w{};
    b1.for_each([&](const Position& w) {
      if (bad) return;
      const std::int32_t v1 = c1[b1.index_of(w)];
      if (v1 >= kUnreach) return;
      const std::int32_t v2 = b2.contains(w) ? c2[b2.index_of(w)] : kUnreach;
      if (v2 > v1) {
        bad = true;
        bad_w = w;
      }
    });
    if (bad) {
      rep.holds = false;
      Path band = cost_backtrace(env1, h1, bad_w);
      Path head = free_path(kOrigin, 0, u, a);
      head.positions.insert(head.positions.end(), band.positions.begin() + 1,
                            band.positions.end());
      const Position last = head.positions.back();
      for (std::int64_t t = t_w + 1; t <= n; ++t) head.positions.push_back(last);
      rep.failing_path = head;
      rep.note = "pinned pair where the slab route cannot match the energy";
      return rep;
    }
  }
  rep.holds = true;

  // Witnesses: deterministic sample paths, each mapped to its cheapest
  // repair, for independent re-verification of the energy inequality.
  const auto offs = StepOffsets::for_dim(env1.dim());
  for (std::size_t widx = 0; widx < witness_cap; ++widx) {
    Path pi;
    pi.start_time = 0;
    pi.positions.assign(std::size_t(n) + 1, kOrigin);
    std::uint64_t h = child_seed(witness_seed, "b-repair-witness", widx);
    for (std::int64_t t = 1; t <= n; ++t) {
      h = mix64(h ^ std::uint64_t(t));
      const Position step = offs.off[widx == 0 ? 0 : int(h % std::uint64_t(offs.count))];
      Position nxt = shifted(pi.positions[std::size_t(t) - 1], step);
      if (linf_norm(nxt) > env1.spatial_window()) nxt = pi.positions[std::size_t(t) - 1];
      pi.positions[std::size_t(t)] = nxt;
    }
    const Position u = pi.at(a);
    const Box ub = Box::centered(env1.dim(), u, 0);
    CostHistory h2 = run_min_cost(env2, a, ub, {0}, t_mid2, nullptr, &budget);
    Path pi2;
    pi2.start_time = 0;
    pi2.positions.assign(pi.positions.begin(), pi.positions.begin() + std::size_t(a) + 1);
    if (rep.suffix_void) {
      const auto& c2 = h2.cost.back();
      const Box& b2 = h2.boxes.back();
      std::int32_t best = kUnreach;
      Position best_w{};
      b2.for_each([&](const Position& p) {
        const std::int32_t v = c2[b2.index_of(p)];
        if (v < best) {
          best = v;
          best_w = p;
        }
      });
      Path band = cost_backtrace(env2, h2, best_w);
      pi2.positions.insert(pi2.positions.end(), band.positions.begin() + 1,
                           band.positions.end());
    } else {
      Path band = cost_backtrace(env2, h2, pi.at(t_w));
      pi2.positions.insert(pi2.positions.end(), band.positions.begin() + 1,
                           band.positions.end());
      for (std::int64_t j = t_w + 1; j <= n - slab; ++j) pi2.positions.push_back(pi.at(j));
    }
    RepairWitness wit;
    wit.original_energy = path_energy(env1, pi, {0, n});
    wit.repaired_energy = path_energy(env2, pi2, {0, pi2.end_time()});
    wit.original = std::move(pi);
    wit.repaired = std::move(pi2);
    rep.repairs.push_back(std::move(wit));
  }
  return rep;
}

std::string verify_repair_witness(const Environment& b, const Environment& sl,
                                  const Environment& e, const ScaleParams& scale, std::int64_t k,
                                  const RepairWitness& w, bool energy_variant) {
  const std::int64_t n = scale.n;
  const std::int64_t l2 = scale.ell2();
  const std::int64_t slab = scale.slab_len;
  const Environment env1 = splice(b, e, k);
  const Environment env2 = splice_slab(b, sl, e, k - 1, k + slab);
  const std::int64_t a = std::max<std::int64_t>(k - 1 - 2 * l2, 0);
  const bool suffix_void = k > n - slab - l2;

  const Path& p1 = w.original;
  const Path& p2 = w.repaired;
  if (p1.start_time != 0 || p2.start_time != 0) return "witness paths must start at time 0";
  if (p1.end_time() != n || p2.end_time() != n) return "witness paths must have length n";
  if (p1.at(0) != kOrigin || p2.at(0) != kOrigin) return "witness paths must start at the origin";
  try {
    p1.validate_steps();
    p2.validate_steps();
  } catch (const std::exception& ex) {
    return ex.what();
  }
  for (std::int64_t j = 0; j <= a; ++j)
    if (p1.at(j) != p2.at(j)) return "prefix pinning violated";
  if (!suffix_void) {
    for (std::int64_t j = k + l2; j <= n - slab; ++j)
      if (p1.at(j) != p2.at(j + slab)) return "shifted suffix pinning violated";
  }
  if (energy_variant) {
    if (path_energy(env2, p2, {0, n}) > path_energy(env1, p1, {0, n}))
      return "energy inequality violated";
  } else {
    if (path_energy(env1, p1, {0, n}) != 0) return "original path not open in [b,e]_k";
    if (path_energy(env2, p2, {0, n}) != 0) return "repaired path not open in the slab environment";
  }
  return {};
}

MartingaleDiffSample martingale_diff_estimate(const Environment& b, const ScaleParams& scale,
                                              std::int64_t k, std::int64_t outer_samples,
                                              std::uint64_t seed, int threads) {
  scale.validate();
  if (k < scale.ell2() + 1 || k > scale.n)
    throw std::invalid_argument("martingale_diff_estimate: requires ell^2 + 1 <= k <= n");
  if (outer_samples < 1) throw std::invalid_argument("martingale_diff_estimate: need samples");
  const double p = b.open_prob();
  if (p < 0.0)
    throw std::invalid_argument("martingale_diff_estimate: base must be a field environment");
  const std::int64_t n = scale.n;
  std::vector<double> diffs(std::size_t(outer_samples), 0.0);
  parallel_for(outer_samples, threads, [&](std::int64_t i) {
    const Environment tail(UniformField(child_seed(seed, "mart-e", std::uint64_t(i)), b.dim()), p,
                           b.spatial_window());
    const Environment slab(UniformField(child_seed(seed, "mart-sl", std::uint64_t(i)), b.dim()), p,
                           b.spatial_window());
    const double v1 = regularized_log(splice(b, tail, k), ExtendedBeta::infinity(), n);
    const double v2 = regularized_log(splice_slab(b, slab, tail, k - 1, k + scale.slab_len),
                                      ExtendedBeta::infinity(), n);
    diffs[std::size_t(i)] = v1 - v2;
  });
  long double sum = 0.0L, sumsq = 0.0L;
  for (double v : diffs) {
    sum += v;
    sumsq += (long double)(v)*v;
  }
  MartingaleDiffSample out;
  out.k = k;
  out.outer_samples = outer_samples;
  out.seed = seed;
  out.estimate = double(sum / outer_samples);
  if (outer_samples > 1) {
    const long double var =
        (sumsq - sum * sum / outer_samples) / (long double)(outer_samples - 1);
    out.stderr_ = double(std::sqrt(std::max(0.0L, var) / outer_samples));
  }
  return out;
}

}  // namespace percolymer
