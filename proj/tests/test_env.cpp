#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "percolymer/env.hpp"

using namespace percolymer;

namespace {
Position pos1(int x) { return Position{std::int32_t(x), 0, 0}; }
}

TEST_CASE("field values are deterministic and uniform") {
  const UniformField f(123456789, 2);
  CHECK(f.value(3, pos1(5)) == f.value(3, pos1(5)));
  CHECK(f.value(3, pos1(5)) != f.value(4, pos1(5)));

  // mean of 10^5 values within 4 standard errors of 1/2
  long double sum = 0.0L;
  const std::int64_t count = 100000;
  for (std::int64_t i = 0; i < count; ++i) {
    Position x{std::int32_t(i % 317 - 158), std::int32_t(i % 91 - 45), 0};
    sum += f.value(i / 317, x);
  }
  const double mean = double(sum / count);
  const double se = 1.0 / std::sqrt(12.0 * double(count));
  CHECK(std::abs(mean - 0.5) < 4 * se);
}

TEST_CASE("open fraction tracks p over 1e5 sites") {
  for (double p : {0.3, 0.8}) {
    const Environment env(UniformField(42, 1), p, 1 << 20);
    std::int64_t open = 0;
    const std::int64_t count = 100000;
    for (std::int64_t i = 0; i < count; ++i)
      open += env.is_open(i % 512, pos1(int(i % 1001) - 500));
    const double frac = double(open) / double(count);
    const double se = std::sqrt(p * (1 - p) / double(count));
    CHECK(std::abs(frac - p) < 4 * se);
  }
}

TEST_CASE("seed derivation rule is stable") {
  // Pinned values: the derivation rule is a documented interface and stored
  // results depend on it.
  CHECK(child_seed(1, "sample", 0) != child_seed(1, "sample", 1));
  CHECK(child_seed(1, "sample", 0) != child_seed(2, "sample", 0));
  CHECK(child_seed(1, "sample", 0) != child_seed(1, "margin-tail", 0));
  CHECK(child_seed(0, "a", 0) == child_seed(0, "a", 0));
}

TEST_CASE("degenerate open probabilities") {
  const UniformField f(7, 1);
  const Environment all(f, 1.0, 100);
  const Environment none(f, 0.0, 100);
  for (int t = 0; t < 20; ++t) {
    CHECK(all.is_open(t, pos1(t % 5)));
    CHECK_FALSE(none.is_open(t, pos1(t % 5)));
  }
}

TEST_CASE("openness is monotone in p at fixed seed") {
  const UniformField f(99, 1);
  const Environment lo(f, 0.4, 100);
  const Environment hi(f, 0.7, 100);
  for (int t = 0; t < 50; ++t)
    for (int x = -20; x <= 20; ++x)
      if (lo.is_open(t, pos1(x))) CHECK(hi.is_open(t, pos1(x)));
}

TEST_CASE("coupled pair shares the field and nests open sets") {
  const UniformField f(2024, 2);
  auto [ep, eq] = coupled_pair(f, 0.6, 0.8, 64);
  std::int64_t checked = 0;
  for (int t = 0; t < 30; ++t)
    for (int x = -10; x <= 10; ++x)
      for (int y = -10; y <= 10; ++y) {
        const Position pt{x, y, 0};
        if (ep.is_open(t, pt)) CHECK(eq.is_open(t, pt));
        ++checked;
      }
  CHECK(checked > 10000);
  CHECK_THROWS_AS(coupled_pair(f, 0.8, 0.6, 64), std::invalid_argument);

  auto [e1, e2] = coupled_pair(f, 0.0, 1.0, 64);
  CHECK_FALSE(e1.is_open(1, pos1(0)));
  CHECK(e2.is_open(1, pos1(0)));
  auto [s1, s2] = coupled_pair(f, 0.5, 0.5, 64);
  for (int t = 0; t < 40; ++t)
    CHECK(s1.is_open(t, pos1(t % 7 - 3)) == s2.is_open(t, pos1(t % 7 - 3)));
}

TEST_CASE("splice reads b up to k and e shifted after") {
  const Environment b(UniformField(11, 1), 0.5, 200);
  const Environment e(UniformField(22, 1), 0.5, 200);
  const std::int64_t k = 9;
  const Environment s = splice(b, e, k);
  for (int t = 0; t <= k; ++t)
    for (int x = -12; x <= 12; ++x)
      CHECK(s.is_open(t, pos1(x)) == b.is_open(t, pos1(x)));  // bit-identical restriction
  for (int t = int(k) + 1; t < k + 30; ++t)
    for (int x = -12; x <= 12; ++x)
      CHECK(s.is_open(t, pos1(x)) == e.is_open(t - k, pos1(x)));
  CHECK(s.is_open(k + 1, pos1(3)) == e.is_open(1, pos1(3)));
}

TEST_CASE("splice boundary cases") {
  const Environment b(UniformField(5, 1), 0.5, 100);
  const Environment e(UniformField(6, 1), 0.5, 100);
  const Environment s0 = splice(b, e, 0);
  CHECK(s0.is_open(0, pos1(2)) == b.is_open(0, pos1(2)));
  for (int t = 1; t < 20; ++t) CHECK(s0.is_open(t, pos1(1)) == e.is_open(t, pos1(1)));

  const Environment self = splice(b, b, 4);
  for (int t = 0; t <= 4; ++t) CHECK(self.is_open(t, pos1(0)) == b.is_open(t, pos1(0)));
  for (int t = 5; t < 15; ++t) CHECK(self.is_open(t, pos1(0)) == b.is_open(t - 4, pos1(0)));

  const Environment d2(UniformField(1, 2), 0.5, 100);
  CHECK_THROWS_AS(splice(b, d2, 3), std::invalid_argument);
}

TEST_CASE("slab splice has three segments") {
  const Environment b(UniformField(31, 1), 0.5, 300);
  const Environment sl(UniformField(32, 1), 0.5, 300);
  const Environment e(UniformField(33, 1), 0.5, 300);

  const Environment same = splice_slab(b, sl, e, 5, 5);  // empty slab
  const Environment plain = splice(b, e, 5);
  for (int t = 0; t < 25; ++t)
    for (int x = -8; x <= 8; ++x)
      CHECK(same.is_open(t, pos1(x)) == plain.is_open(t, pos1(x)));

  const Environment s = splice_slab(b, sl, e, 0, 3);
  CHECK(s.is_open(2, pos1(1)) == sl.is_open(2, pos1(1)));
  CHECK(s.is_open(4, pos1(1)) == e.is_open(1, pos1(1)));

  // the martingale-difference geometry: slab of length slab+1 inserted at k
  const std::int64_t k = 7, slab = 16;
  const Environment m = splice_slab(b, sl, e, k - 1, k + slab);
  CHECK(m.is_open(k, pos1(2)) == sl.is_open(1, pos1(2)));
  CHECK(m.is_open(k + slab + 1, pos1(2)) == e.is_open(1, pos1(2)));
  for (int t = 0; t <= k - 1; ++t) CHECK(m.is_open(t, pos1(0)) == b.is_open(t, pos1(0)));

  CHECK_THROWS_AS(splice_slab(b, sl, e, 4, 3), std::invalid_argument);
}

TEST_CASE("splicing composes") {
  const Environment a(UniformField(41, 1), 0.6, 100);
  const Environment b(UniformField(42, 1), 0.6, 100);
  const Environment c(UniformField(43, 1), 0.6, 100);
  const Environment inner = splice(a, b, 3);
  const Environment outer = splice(inner, c, 10);
  for (int t = 0; t <= 3; ++t) CHECK(outer.is_open(t, pos1(1)) == a.is_open(t, pos1(1)));
  for (int t = 4; t <= 10; ++t) CHECK(outer.is_open(t, pos1(1)) == b.is_open(t - 3, pos1(1)));
  for (int t = 11; t < 30; ++t) CHECK(outer.is_open(t, pos1(1)) == c.is_open(t - 10, pos1(1)));
}

TEST_CASE("window violations throw instead of wrapping") {
  const Environment env(UniformField(3, 1), 0.5, 16);
  CHECK_THROWS_AS((void)env.is_open(0, pos1(17)), std::out_of_range);
  CHECK_THROWS_AS((void)env.is_open(-1, pos1(0)), std::out_of_range);
  CHECK_NOTHROW((void)env.is_open(0, pos1(16)));

  const EnvironmentWindow w(env, 2, 5);
  CHECK_NOTHROW((void)w.is_open(2, pos1(1)));
  CHECK_THROWS_AS((void)w.is_open(1, pos1(1)), std::out_of_range);
  CHECK_THROWS_AS((void)w.is_open(6, pos1(1)), std::out_of_range);
  CHECK_THROWS_AS(EnvironmentWindow(env, 5, 2), std::invalid_argument);
}

TEST_CASE("queries are order and thread independent") {
  const Environment env(UniformField(77, 1), 0.5, 4096);
  std::vector<std::uint8_t> forward, backward;
  for (int i = 0; i < 2000; ++i) forward.push_back(env.is_open(i % 64, pos1(i - 1000)));
  for (int i = 1999; i >= 0; --i) backward.push_back(env.is_open(i % 64, pos1(i - 1000)));
  for (int i = 0; i < 2000; ++i) CHECK(forward[i] == backward[1999 - i]);

  std::vector<std::uint8_t> a(2000), b(2000);
  auto worker = [&](std::vector<std::uint8_t>& out) {
    for (int i = 0; i < 2000; ++i) out[i] = env.is_open(i % 64, pos1(i - 1000));
  };
  std::thread t1(worker, std::ref(a)), t2(worker, std::ref(b));
  t1.join();
  t2.join();
  CHECK(a == b);
  for (int i = 0; i < 2000; ++i) CHECK(a[i] == forward[i]);
}

TEST_CASE("time-space shift relabels sites") {
  const Environment env(UniformField(88, 2), 0.5, 64);
  const Environment moved = env.shifted(5, Position{2, -3, 0});
  for (int t = 0; t < 12; ++t)
    for (int x = -6; x <= 6; ++x) {
      const Position q{x, 1, 0};
      CHECK(moved.is_open(t, q) == env.is_open(t + 5, Position{x + 2, -2, 0}));
    }
}

TEST_CASE("grid environments express contrived patterns") {
  // open only along the diagonal x = t
  auto grid = std::make_shared<OpenGrid>();
  grid->d = 1;
  grid->t_lo = 0;
  grid->t_hi = 10;
  grid->box = Box::centered(1, kOrigin, 10);
  grid->open.assign(11 * grid->box.size(), 0);
  for (int t = 0; t <= 10; ++t)
    grid->open[std::size_t(t) * grid->box.size() + grid->box.index_of(pos1(t))] = 1;
  const Environment env = Environment::from_grid(grid, 10);
  CHECK(env.is_open(4, pos1(4)));
  CHECK_FALSE(env.is_open(4, pos1(3)));
  CHECK(env.open_prob() == -1.0);
}
