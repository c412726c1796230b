#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "percolymer/events.hpp"

using namespace percolymer;

namespace {

Position pos1(int x) { return Position{std::int32_t(x), 0, 0}; }

Environment random_env(int d, double p, std::int64_t window, std::uint64_t seed) {
  return Environment(UniformField(seed, d), p, window);
}

Environment closed_slice_one(double p, std::int64_t window, std::uint64_t seed) {
  return splice(Environment(UniformField(seed, 1), 0.0, window),
                Environment(UniformField(seed + 1, 1), p, window), 1);
}

MarginConfig tiny_margins(std::uint64_t seed) {
  MarginConfig cfg;
  cfg.inner_samples = 60;
  cfg.horizon_pad = 24;
  cfg.seed = seed;
  return cfg;
}

// Enumerates open paths from (0, origin) to (t_end, Z^d) and feeds each to fn.
void for_each_open_path(const Environment& env, std::int64_t t_end,
                        const std::function<void(const std::vector<Position>&)>& fn) {
  const auto offs = StepOffsets::for_dim(env.dim());
  std::vector<Position> walk{kOrigin};
  auto descend = [&](auto&& self, std::int64_t t) -> void {
    if (t == t_end) {
      fn(walk);
      return;
    }
    for (int i = 0; i < offs.count; ++i) {
      const Position y = shifted(walk.back(), offs.off[i]);
      if (linf_norm(y) > env.spatial_window()) continue;
      if (!env.is_open(t + 1, y)) continue;
      walk.push_back(y);
      self(self, t + 1);
      walk.pop_back();
    }
  };
  descend(descend, 0);
}

// Enumerates all paths (open or not) from `from` over [t0, t_end].
void for_each_free_path(const Environment& env, const Position& from, std::int64_t t0,
                        std::int64_t t_end,
                        const std::function<void(const std::vector<Position>&)>& fn) {
  const auto offs = StepOffsets::for_dim(env.dim());
  std::vector<Position> walk{from};
  auto descend = [&](auto&& self, std::int64_t t) -> void {
    if (t == t_end) {
      fn(walk);
      return;
    }
    for (int i = 0; i < offs.count; ++i) {
      const Position y = shifted(walk.back(), offs.off[i]);
      if (linf_norm(y) > env.spatial_window()) continue;
      walk.push_back(y);
      self(self, t + 1);
      walk.pop_back();
    }
  };
  descend(descend, t0);
}

}  // namespace

TEST_CASE("scale parameter defaults") {
  const ScaleParams def = ScaleParams::for_length(64);
  CHECK(def.ell == 17);  // floor((log 64)^2)
  CHECK(def.slab_len == 17LL * 17 * 17 * 17);
  const ScaleParams small = ScaleParams::with_ell(64, 2);
  CHECK(small.ell2() == 4);
  CHECK(small.slab_len == 16);
  CHECK_THROWS_AS(ScaleParams::with_ell(0, 1), std::invalid_argument);
}

TEST_CASE("good points in degenerate environments") {
  const MarginConfig cfg = tiny_margins(1);
  const GoodPoint g = good_point(random_env(1, 1.0, 64, 1), 0, kOrigin, 3, cfg);
  CHECK(g.margin == 1.0);
  CHECK(g.good);
  CHECK(g.threshold == doctest::Approx(1.0 - std::exp(-cfg.c * 3)));

  const GoodPoint dead = good_point(closed_slice_one(0.9, 64, 3), 0, kOrigin, 3, cfg);
  CHECK(dead.margin == 0.0);
  CHECK_FALSE(dead.good);

  // determinism: same inputs, same classification
  const Environment env = random_env(1, 0.7, 64, 9);
  const GoodPoint a = good_point(env, 2, pos1(1), 4, cfg);
  const GoodPoint b = good_point(env, 2, pos1(1), 4, cfg);
  CHECK(a.margin == b.margin);
}

TEST_CASE("anticipating connection event") {
  const ScaleParams scale = ScaleParams::with_ell(16, 2);
  const MarginConfig cfg = tiny_margins(5);

  // no open path to (k, Z^d): holds vacuously
  CHECK(check_a_conn(closed_slice_one(0.8, 64, 2), scale, 6, cfg).holds);
  // p = 1: every margin is 1
  CHECK(check_a_conn(random_env(1, 1.0, 64, 2), scale, 6, cfg).holds);
  CHECK_THROWS_AS(check_a_conn(random_env(1, 0.8, 64, 2), scale, 3, cfg),
                  std::invalid_argument);

  // exhaustive definitional oracle
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (std::int64_t k : {4, 6}) {
      const Environment env = random_env(1, 0.62, 64, child_seed(40, "aconn", seed));
      MarginConfig mc = tiny_margins(child_seed(41, "aconn-m", seed));
      const EventReport got = check_a_conn(env, scale, k, mc);
      bool want = true;
      for_each_open_path(env, k, [&](const std::vector<Position>& walk) {
        if (!want) return;
        bool ok = false;
        for (std::int64_t j = scale.ell2(); j <= std::min(2 * scale.ell2(), k); ++j)
          if (good_point_pair(env, k - j, walk[std::size_t(k - j)], j, mc).good) ok = true;
        if (!ok) want = false;
      });
      CHECK(got.holds == want);
      if (!got.holds) {
        REQUIRE(got.failing_path.has_value());
        const Path& fp = *got.failing_path;
        CHECK(fp.end_time() == k);
        CHECK(path_energy(env, fp, {0, k}) == 0);  // failing witness is an open path
        for (std::int64_t j = scale.ell2(); j <= std::min(2 * scale.ell2(), k); ++j)
          CHECK_FALSE(good_point_pair(env, k - j, fp.at(k - j), j, mc).good);
      }
    }
  }
}

TEST_CASE("backward dichotomy event") {
  const ScaleParams scale = ScaleParams::with_ell(16, 2);
  const MarginConfig cfg = tiny_margins(6);

  // fully closed slice k+2 disconnects every x in the box
  const Environment head(UniformField(10, 1), 0.8, 64);
  const Environment blocked = splice(splice(head, random_env(1, 0.0, 64, 11), 5),
                                     random_env(1, 0.8, 64, 12), 6);
  CHECK(check_a_bar(blocked, scale, 4, cfg).holds);  // slice k+2 = 6 reads the closed field
  CHECK(check_a_bar(random_env(1, 1.0, 64, 10), scale, 4, cfg).holds);

  // tiny oracle: direct evaluation per box point
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::int64_t k = 4;
    const Environment env = random_env(1, 0.6, 64, child_seed(42, "abar", seed));
    MarginConfig mc = tiny_margins(child_seed(43, "abar-m", seed));
    const EventReport got = check_a_bar(env, scale, k, mc);
    bool want = true;
    const std::int64_t l2 = scale.ell2();
    for (int x = -int(k + l2); x <= int(k + l2) && want; ++x) {
      bool reachable = false;
      for (int y = -int(k + 2 * l2); y <= int(k + 2 * l2) && !reachable; ++y) {
        if (l1_dist(pos1(y), pos1(x)) > l2 - 1) continue;
        // path from (k+1, y) to (k+l2, x), открытость on (k+1, k+l2]
        std::vector<Position> front{pos1(y)};
        std::set<Position> cur{pos1(y)};
        for (std::int64_t t = k + 2; t <= k + l2; ++t) {
          std::set<Position> next;
          for (const auto& q : cur)
            for (int dd = -1; dd <= 1; ++dd) {
              const Position z = pos1(q[0] + dd);
              if (env.is_open(t, z)) next.insert(z);
            }
          cur = std::move(next);
        }
        reachable = cur.count(pos1(x)) > 0;
      }
      if (reachable && !good_point(env, k + l2, pos1(x), l2 - 1, mc, true).good) want = false;
    }
    CHECK(got.holds == want);
  }
}

TEST_CASE("repair event at zero temperature") {
  const ScaleParams scale = ScaleParams::with_ell(12, 1);
  const std::int64_t n = scale.n, k = 6;

  // all open: the diagonal-shift repair always exists
  const Environment open = random_env(1, 1.0, 64, 1);
  const EventReport easy = check_a_repair(open, open, open, scale, k);
  CHECK(easy.holds);
  CHECK_FALSE(easy.suffix_void);
  CHECK(easy.repairs.size() > 0);
  for (const auto& w : easy.repairs)
    CHECK(verify_repair_witness(open, open, open, scale, k, w, false).empty());

  // fully closed slab blocks every repair while pi_1 exists
  const Environment shut(UniformField(2, 1), 0.0, 64);
  const EventReport hard = check_a_repair(open, shut, open, scale, k);
  CHECK_FALSE(hard.holds);
  REQUIRE(hard.failing_path.has_value());

  // enumeration oracle over random instances
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Environment b = random_env(1, 0.78, 64, child_seed(50, "b", seed));
    const Environment sl = random_env(1, 0.78, 64, child_seed(50, "sl", seed));
    const Environment e = random_env(1, 0.78, 64, child_seed(50, "e", seed));
    const EventReport got = check_a_repair(b, sl, e, scale, k, 64);
    const Environment env1 = splice(b, e, k);
    const Environment env2 = splice_slab(b, sl, e, k - 1, k + scale.slab_len);
    const std::int64_t a = std::max<std::int64_t>(k - 1 - 2 * scale.ell2(), 0);
    const std::int64_t t_w = k + scale.ell2();
    std::map<std::pair<Position, Position>, bool> cache;
    bool want = true;
    for_each_open_path(env1, n, [&](const std::vector<Position>& walk) {
      if (!want) return;
      const auto key = std::make_pair(walk[std::size_t(a)], walk[std::size_t(t_w)]);
      auto it = cache.find(key);
      if (it == cache.end()) {
        bool found = false;
        for_each_free_path(env2, key.first, a, t_w + scale.slab_len,
                           [&](const std::vector<Position>& mid) {
                             if (found || mid.back() != key.second) return;
                             bool open_mid = true;
                             for (std::size_t i = 1; i < mid.size(); ++i)
                               if (!env2.is_open(a + std::int64_t(i), mid[i])) open_mid = false;
                             if (open_mid) found = true;
                           });
        it = cache.emplace(key, found).first;
      }
      if (!it->second) want = false;
    });
    CHECK(got.holds == want);
    for (const auto& w : got.repairs)
      CHECK(verify_repair_witness(b, sl, e, scale, k, w, false).empty());
  }
}

TEST_CASE("positive-temperature connection event") {
  const ScaleParams scale = ScaleParams::with_ell(16, 2);
  CHECK(check_b_conn(random_env(1, 1.0, 64, 3), scale, 8, tiny_margins(7)).holds);

  // k < 2 ell^2: identical to the open-path event quantified over all paths
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::int64_t k = 6;  // < 8 = 2 ell^2
    const Environment env = random_env(1, 0.62, 64, child_seed(60, "bconn", seed));
    MarginConfig mc = tiny_margins(child_seed(61, "bconn-m", seed));
    const EventReport got = check_b_conn(env, scale, k, mc);
    bool want = true;
    for_each_free_path(env, kOrigin, 0, k - scale.ell2(),
                       [&](const std::vector<Position>& walk) {
                         if (!want) return;
                         bool ok = false;
                         for (std::int64_t j = scale.ell2(); j <= k; ++j)
                           if (good_point_pair(env, k - j, walk[std::size_t(k - j)], j, mc).good)
                             ok = true;
                         if (!ok) want = false;
                       });
    CHECK(got.holds == want);
  }

  // k >= 2 ell^2: energy-threshold alternative active
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const std::int64_t k = 9;
    const Environment env = random_env(1, 0.55, 64, child_seed(62, "bconn2", seed));
    MarginConfig mc = tiny_margins(child_seed(63, "bconn2-m", seed));
    const EventReport got = check_b_conn(env, scale, k, mc);
    const std::int64_t l2 = scale.ell2(), t0 = k - 2 * l2, t1 = k - l2;
    bool want = true;
    for_each_free_path(env, kOrigin, 0, t1, [&](const std::vector<Position>& walk) {
      if (!want) return;
      bool ok = false;
      for (std::int64_t j = l2; j <= std::min(2 * l2, k); ++j)
        if (good_point_pair(env, k - j, walk[std::size_t(k - j)], j, mc).good) ok = true;
      if (!ok) {
        std::int64_t h = 0;
        for (std::int64_t t = t0 + 1; t <= t1; ++t)
          if (!env.is_open(t, walk[std::size_t(t)])) ++h;
        if (h >= scale.ell) {
          for (int dx = -int(scale.ell); dx <= int(scale.ell) && !ok; ++dx) {
            const Position x = pos1(walk[std::size_t(t0)][0] + dx);
            if (good_point_pair(env, k - 2 * l2 + scale.ell, x, 2 * l2 - scale.ell, mc).good)
              ok = true;
          }
        }
      }
      if (!ok) want = false;
    });
    CHECK(got.holds == want);
  }
}

TEST_CASE("positive-temperature backward event") {
  const ScaleParams scale = ScaleParams::with_ell(6, 1);
  CHECK(check_b_bar(random_env(1, 1.0, 64, 4), scale, 2, tiny_margins(8)).holds);

  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::int64_t k = 2;
    const Environment env = random_env(1, 0.6, 64, child_seed(70, "bbar", seed));
    MarginConfig mc = tiny_margins(child_seed(71, "bbar-m", seed));
    const EventReport got = check_b_bar(env, scale, k, mc);
    const std::int64_t l2 = scale.ell2();
    bool want = true;
    for (int y = -int(scale.n); y <= int(scale.n) && want; ++y) {
      for_each_free_path(env, pos1(y), k, k + 2 * l2, [&](const std::vector<Position>& walk) {
        if (!want) return;
        bool ok = false;
        for (std::int64_t j = l2; j <= 2 * l2; ++j)
          if (good_point(env, k + j, walk[std::size_t(j)], j - 1, mc, true).good) ok = true;
        if (!ok) {
          std::int64_t h = 0;
          for (std::int64_t t = k + l2 + 1; t <= k + 2 * l2; ++t)
            if (!env.is_open(t, walk[std::size_t(t - k)])) ++h;
          if (h >= scale.ell) {
            const Position w = walk[std::size_t(2 * l2)];
            for (int dx = -int(scale.ell); dx <= int(scale.ell) && !ok; ++dx)
              if (good_point(env, k + 2 * l2 - scale.ell, pos1(w[0] + dx),
                             2 * l2 - scale.ell - 1, mc, true)
                      .good)
                ok = true;
          }
        }
        if (!ok) want = false;
      });
    }
    CHECK(got.holds == want);
  }
}

TEST_CASE("repair event dominating the energy") {
  const ScaleParams scale = ScaleParams::with_ell(12, 1);
  const std::int64_t k = 6;

  const Environment open = random_env(1, 1.0, 64, 1);
  const EventReport easy = check_b_repair(open, open, open, scale, k, 4, 99);
  CHECK(easy.holds);
  for (const auto& w : easy.repairs) {
    CHECK(w.repaired_energy <= w.original_energy);
    CHECK(verify_repair_witness(open, open, open, scale, k, w, true).empty());
  }

  // all-open slab with the suffix constraint void: middle rebuilt freely
  const ScaleParams coarse = ScaleParams::with_ell(12, 2);  // slab 16 > n: always void
  const Environment b = random_env(1, 0.5, 64, 21);
  const Environment e = random_env(1, 0.5, 64, 22);
  const EventReport freed = check_b_repair(b, open, e, coarse, 11, 4, 99);
  CHECK(freed.suffix_void);
  CHECK(freed.holds);

  // enumeration oracle: per (prefix endpoint, suffix anchor), the cheapest
  // slab-side middle must not exceed the original middle energy of any path
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Environment bb = random_env(1, 0.7, 64, child_seed(80, "b", seed));
    const Environment sl = random_env(1, 0.7, 64, child_seed(80, "sl", seed));
    const Environment ee = random_env(1, 0.7, 64, child_seed(80, "e", seed));
    const EventReport got = check_b_repair(bb, sl, ee, scale, k, 4, child_seed(80, "w", seed));
    const Environment env1 = splice(bb, ee, k);
    const Environment env2 = splice_slab(bb, sl, ee, k - 1, k + scale.slab_len);
    const std::int64_t a = std::max<std::int64_t>(k - 1 - 2 * scale.ell2(), 0);
    const std::int64_t t_w = k + scale.ell2();
    std::map<std::pair<Position, Position>, std::int64_t> min_slab;
    auto slab_min = [&](const Position& u, const Position& w) {
      const auto key = std::make_pair(u, w);
      auto it = min_slab.find(key);
      if (it != min_slab.end()) return it->second;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for_each_free_path(env2, u, a, t_w + scale.slab_len,
                         [&](const std::vector<Position>& mid) {
                           if (mid.back() != w) return;
                           std::int64_t h = 0;
                           for (std::size_t i = 1; i < mid.size(); ++i)
                             if (!env2.is_open(a + std::int64_t(i), mid[i])) ++h;
                           best = std::min(best, h);
                         });
      min_slab.emplace(key, best);
      return best;
    };
    bool want = true;
    for_each_free_path(env1, kOrigin, 0, t_w, [&](const std::vector<Position>& walk) {
      if (!want) return;
      std::int64_t h_mid = 0;
      for (std::int64_t t = a + 1; t <= t_w; ++t)
        if (!env1.is_open(t, walk[std::size_t(t)])) ++h_mid;
      if (slab_min(walk[std::size_t(a)], walk[std::size_t(t_w)]) > h_mid) want = false;
    });
    CHECK(got.holds == want);
  }
}

TEST_CASE("martingale differences") {
  const ScaleParams scale = ScaleParams::with_ell(24, 1);

  // deterministic environments: both coupled terms coincide
  const auto flat = martingale_diff_estimate(random_env(1, 1.0, 24, 1), scale, 8, 20, 3);
  CHECK(flat.estimate == 0.0);
  CHECK(flat.stderr_ == 0.0);

  const auto dead = martingale_diff_estimate(closed_slice_one(0.8, 24, 5), scale, 8, 20, 3);
  CHECK(dead.estimate == 0.0);

  CHECK_THROWS_AS(martingale_diff_estimate(random_env(1, 0.8, 24, 1), scale, 1, 10, 3),
                  std::invalid_argument);

  // trivial bound and the tower property: mean over fresh bases is 0
  const std::int64_t n = 24, k = 12;
  const double bound = double(n) * std::log(3.0);
  long double sum = 0.0L, sumsq = 0.0L;
  const std::int64_t bases = 40;
  for (std::int64_t i = 0; i < bases; ++i) {
    const Environment base = random_env(1, 0.8, 24, child_seed(90, "base", std::uint64_t(i)));
    const auto s = martingale_diff_estimate(base, scale, k, 24, child_seed(91, "mc", i));
    CHECK(std::abs(s.estimate) <= bound + 1e-9);
    sum += s.estimate;
    sumsq += (long double)(s.estimate) * s.estimate;
  }
  const double mean = double(sum / bases);
  const double sd = std::sqrt(std::max(0.0, double(sumsq / bases) - mean * mean));
  const double se = sd / std::sqrt(double(bases));
  CHECK(std::abs(mean) <= 3 * se + 1e-9);
}

TEST_CASE("witness verification rejects corrupted repairs") {
  const ScaleParams scale = ScaleParams::with_ell(12, 1);
  const Environment open = random_env(1, 1.0, 64, 1);
  EventReport rep = check_a_repair(open, open, open, scale, 6, 2);
  REQUIRE(rep.repairs.size() > 0);
  RepairWitness w = rep.repairs.front();
  w.repaired.positions[3][0] += 5;  // break a step
  CHECK_FALSE(verify_repair_witness(open, open, open, scale, 6, w, false).empty());
}
