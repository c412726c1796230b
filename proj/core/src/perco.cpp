#include "percolymer/perco.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "percolymer/threading.hpp"

namespace percolymer {

ReachSet ReachSet::of(int d, std::int64_t t, const std::vector<Position>& pts) {
  if (pts.empty()) return ReachSet{t, Box{d, kOrigin, kOrigin}, std::vector<std::uint8_t>{0}};
  ReachSet r;
  r.t = t;
  r.support = Box::hull(d, pts);
  r.bits.assign(r.support.size(), 0);
  for (const auto& p : pts) r.bits[r.support.index_of(p)] = 1;
  return r;
}

bool ReachSet::any() const {
  for (auto b : bits)
    if (b) return true;
  return false;
}

std::int64_t ReachSet::count() const {
  std::int64_t n = 0;
  for (auto b : bits) n += b;
  return n;
}

std::vector<Position> ReachSet::positions() const {
  std::vector<Position> out;
  support.for_each([&](const Position& p) {
    if (bits[support.index_of(p)]) out.push_back(p);
  });
  return out;
}

namespace {

// Shrink the stored box to the hull of the live cells, so thin fronts stay
// cheap over long horizons.
void compact(ReachSet& r) {
  Position lo{}, hi{};
  bool seen = false;
  r.support.for_each([&](const Position& p) {
    if (!r.bits[r.support.index_of(p)]) return;
    if (!seen) {
      lo = hi = p;
      seen = true;
      return;
    }
    for (int i = 0; i < kMaxDim; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  });
  if (!seen) {
    r.support = Box{r.support.d, kOrigin, kOrigin};
    r.bits.assign(1, 0);
    return;
  }
  Box nb{r.support.d, lo, hi};
  if (nb.size() == r.support.size()) return;
  std::vector<std::uint8_t> bits(nb.size(), 0);
  nb.for_each([&](const Position& p) {
    bits[nb.index_of(p)] = r.bits[r.support.index_of(p)];
  });
  r.support = nb;
  r.bits = std::move(bits);
}

}  // namespace

ReachSet evolve_front(const Environment& env, const ReachSet& front, std::int64_t t) {
  if (t < front.t) throw std::invalid_argument("evolve_front: time runs forward");
  const int d = env.dim();
  const std::int64_t cap = env.spatial_window();
  const auto offs = StepOffsets::for_dim(d);
  ReachSet cur = front;
  for (std::int64_t r = front.t + 1; r <= t; ++r) {
    if (!cur.any()) {  // absorbing
      cur.t = t;
      return cur;
    }
    ReachSet next;
    next.t = r;
    next.support = cur.support.expanded(1, cap);
    next.bits.assign(next.support.size(), 0);
    next.support.for_each([&](const Position& y) {
      for (int i = 0; i < offs.count; ++i) {
        const Position x = shifted(y, offs.off[i]);
        if (cur.contains(x)) {
          if (env.is_open(r, y)) next.bits[next.support.index_of(y)] = 1;
          return;
        }
      }
    });
    compact(next);
    cur = std::move(next);
  }
  cur.t = t;
  return cur;
}

ReachSet reach_forward(const Environment& env, std::int64_t s, const std::vector<Position>& A,
                       std::int64_t t) {
  if (s > t) throw std::invalid_argument("reach_forward: s > t");
  for (const auto& p : A)
    if (linf_norm(p) > env.spatial_window())
      throw std::out_of_range("reach_forward: source outside spatial window");
  return evolve_front(env, ReachSet::of(env.dim(), s, A), t);
}

bool connected(const Environment& env, std::int64_t s, const std::vector<Position>& A,
               std::int64_t t, const std::vector<Position>& B) {
  const ReachSet r = reach_forward(env, s, A, t);
  for (const auto& b : B)
    if (r.contains(b)) return true;
  return false;
}

ReachSet reach_backward(const Environment& env, std::int64_t t, const std::vector<Position>& B,
                        std::int64_t s) {
  if (s > t) throw std::invalid_argument("reach_backward: s > t");
  const int d = env.dim();
  const std::int64_t cap = env.spatial_window();
  const auto offs = StepOffsets::for_dim(d);
  ReachSet cur = ReachSet::of(d, t, B);
  for (std::int64_t r = t - 1; r >= s; --r) {
    ReachSet next;
    next.t = r;
    next.support = cur.support.expanded(1, cap);
    next.bits.assign(next.support.size(), 0);
    next.support.for_each([&](const Position& x) {
      for (int i = 0; i < offs.count; ++i) {
        const Position y = shifted(x, offs.off[i]);
        if (cur.contains(y) && env.is_open(r + 1, y)) {
          next.bits[next.support.index_of(x)] = 1;
          return;
        }
      }
    });
    compact(next);
    cur = std::move(next);
  }
  return cur;
}

bool coupled_zone_check(const Environment& env, std::int64_t n, const Position& x, std::int64_t k,
                        const CoupledZoneParams& params) {
  if (k < 0) throw std::invalid_argument("coupled_zone_check: negative depth");
  if (linf_norm(x) + 2 * k > env.spatial_window())
    throw std::out_of_range("coupled_zone_check: window too small for the truncated source");
  const std::int64_t radius = std::int64_t(std::floor(params.v * double(k)));
  const ReachSet from_x = reach_forward(env, n, {x}, n + k);
  if (!from_x.any()) return false;
  std::vector<Position> slab;
  Box::centered(env.dim(), x, 2 * k).for_each([&](const Position& z) { slab.push_back(z); });
  const ReachSet from_all = evolve_front(env, ReachSet::of(env.dim(), n, slab), n + k);
  bool ok = true;
  Box::centered(env.dim(), x, radius).for_each([&](const Position& y) {
    if (from_all.contains(y) && !from_x.contains(y)) ok = false;
  });
  return ok;
}

bool coupled_zone_check_backward(const Environment& env, std::int64_t n, const Position& x,
                                 std::int64_t k, const CoupledZoneParams& params) {
  if (k < 0) throw std::invalid_argument("coupled_zone_check_backward: negative depth");
  if (n - k < 0) throw std::invalid_argument("coupled_zone_check_backward: window before time 0");
  if (linf_norm(x) + 2 * k > env.spatial_window())
    throw std::out_of_range("coupled_zone_check_backward: window too small");
  const std::int64_t radius = std::int64_t(std::floor(params.v * double(k)));
  if (!env.is_open(n, x)) return false;  // (n-k, Z^d) <-> (n, x) needs the top site open
  const ReachSet to_x = reach_backward(env, n, {x}, n - k);
  if (!to_x.any()) return false;
  // y at n-k survives to (n, Z^d) iff it reaches any open site at n.
  std::vector<Position> top;
  Box::centered(env.dim(), x, 2 * k).for_each([&](const Position& z) {
    if (env.is_open(n, z)) top.push_back(z);
  });
  ReachSet survives;
  if (top.empty())
    survives = ReachSet::of(env.dim(), n - k, {});
  else
    survives = reach_backward(env, n, top, n - k);
  bool ok = true;
  Box::centered(env.dim(), x, radius).for_each([&](const Position& y) {
    if (survives.contains(y) && !to_x.contains(y)) ok = false;
  });
  return ok;
}

SurvivalEstimate survival_estimate(int d, double p, std::int64_t horizon, std::int64_t buffer,
                                   std::int64_t samples, std::uint64_t seed, int threads) {
  require_dim(d);
  if (horizon < 1) throw std::invalid_argument("survival_estimate: horizon must be >= 1");
  if (samples < 1) throw std::invalid_argument("survival_estimate: need samples >= 1");
  const std::int64_t t_end = horizon + buffer;
  std::vector<std::uint8_t> hit(std::size_t(samples), 0);
  parallel_for(samples, threads, [&](std::int64_t i) {
    const UniformField field(child_seed(seed, "survival", std::uint64_t(i)), d);
    const Environment env(field, p, t_end);
    hit[std::size_t(i)] = reach_forward(env, 0, {kOrigin}, t_end).any() ? 1 : 0;
  });
  SurvivalEstimate est;
  est.d = d;
  est.p = p;
  est.horizon = horizon;
  est.buffer = buffer;
  est.samples = samples;
  est.seed = seed;
  for (auto h : hit) est.hits += h;
  est.estimate = double(est.hits) / double(samples);
  est.stderr_ = std::sqrt(est.estimate * (1.0 - est.estimate) / double(samples));
  return est;
}

MarginEstimate conditional_survival_margin(const EnvironmentWindow& window, const Position& x,
                                           std::int64_t horizon, std::int64_t inner_samples,
                                           std::uint64_t seed) {
  if (inner_samples < 1) throw std::invalid_argument("margin: need inner samples");
  const std::int64_t base_t = window.t_lo();
  const std::int64_t goal_t = base_t + horizon;
  const std::int64_t need_window = linf_norm(x) + horizon;
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < inner_samples; ++i) {
    const UniformField tail(child_seed(seed, "margin-tail", std::uint64_t(i)), window.env().dim());
    const Environment resampled =
        splice(window.env().with_window(need_window),
               Environment(tail, window.env().open_prob(), need_window), window.t_hi());
    if (reach_forward(resampled, base_t, {x}, goal_t).any()) ++hits;
  }
  MarginEstimate m;
  m.inner_samples = inner_samples;
  m.estimate = double(hits) / double(inner_samples);
  m.stderr_ = std::sqrt(m.estimate * (1.0 - m.estimate) / double(inner_samples));
  return m;
}

MarginEstimate conditional_backward_margin(const EnvironmentWindow& window, const Position& x,
                                           std::int64_t horizon, std::int64_t inner_samples,
                                           std::uint64_t seed) {
  if (inner_samples < 1) throw std::invalid_argument("margin: need inner samples");
  const std::int64_t top_t = window.t_hi();
  const std::int64_t from_t = std::max<std::int64_t>(0, top_t - horizon);
  const std::int64_t need_window = linf_norm(x) + horizon;
  std::int64_t hits = 0;
  if (!window.env().is_open(top_t, x)) {
    // Backward percolation requires the largest-time site open.
    return MarginEstimate{0.0, 0.0, inner_samples};
  }
  for (std::int64_t i = 0; i < inner_samples; ++i) {
    const UniformField head(child_seed(seed, "margin-head", std::uint64_t(i)), window.env().dim());
    Environment resampled =
        window.t_lo() == 0
            ? window.env().with_window(need_window)
            : splice(Environment(head, window.env().open_prob(), need_window),
                     window.env().with_window(need_window).shifted(window.t_lo() - 1, kOrigin),
                     window.t_lo() - 1);
    if (reach_backward(resampled, top_t, {x}, from_t).any()) ++hits;
  }
  MarginEstimate m;
  m.inner_samples = inner_samples;
  m.estimate = double(hits) / double(inner_samples);
  m.stderr_ = std::sqrt(m.estimate * (1.0 - m.estimate) / double(inner_samples));
  return m;
}

double critical_estimate(int d, std::int64_t horizon, std::int64_t samples, double tol,
                         std::uint64_t seed, double survival_threshold, int threads) {
  require_dim(d);
  if (tol <= 0.0) throw std::invalid_argument("critical_estimate: tol must be positive");
  double lo = 0.0, hi = 1.0;
  std::uint64_t level = 0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const auto sur = survival_estimate(d, mid, horizon, 0, samples,
                                       child_seed(seed, "critical-level", level++), threads);
    (sur.estimate >= survival_threshold ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace percolymer
