#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "percolymer/enumerate.hpp"
#include "percolymer/polymer.hpp"

using namespace percolymer;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Position pos1(int x) { return Position{std::int32_t(x), 0, 0}; }

Environment random_env(int d, double p, std::int64_t window, std::uint64_t seed) {
  return Environment(UniformField(seed, d), p, window);
}

// Environment whose slice t = 1 is fully closed: splice a p = 0 head onto a
// normal tail.
Environment closed_slice_one(double p, std::int64_t window, std::uint64_t seed) {
  const Environment head(UniformField(seed, 1), 0.0, window);
  const Environment tail(UniformField(seed + 1, 1), p, window);
  return splice(head, tail, 1);
}

}  // namespace

TEST_CASE("path energy counts closed visited sites") {
  Path path;
  path.start_time = 0;
  for (int t = 0; t <= 8; ++t) path.positions.push_back(pos1(t / 3));
  path.validate_steps();

  CHECK(path_energy(random_env(1, 1.0, 32, 1), path, {0, 8}) == 0);
  CHECK(path_energy(random_env(1, 0.0, 32, 1), path, {0, 8}) == 8);

  const Environment env = random_env(1, 0.5, 32, 99);
  std::int64_t direct = 0;
  for (int t = 3; t <= 7; ++t) direct += env.is_open(t, path.at(t)) ? 0 : 1;
  CHECK(path_energy(env, path, {2, 7}) == direct);

  CHECK_THROWS_AS(path_energy(env, path, {0, 9}), std::invalid_argument);
  CHECK_THROWS_AS(path_energy(env, path, {-1, 5}), std::invalid_argument);

  Path bad;
  bad.start_time = 0;
  bad.positions = {pos1(0), pos1(2)};
  CHECK_THROWS_AS(bad.validate_steps(), std::invalid_argument);
}

TEST_CASE("degenerate partition values") {
  // beta = 0 counts all paths regardless of the environment
  const double v = partition_log(random_env(1, 0.3, 8, 5), ExtendedBeta(0.0), 5);
  CHECK(v == doctest::Approx(5 * std::log(3.0)).epsilon(1e-12));

  // beta = inf in an all-open environment counts all paths too
  const double w = partition_log(random_env(2, 1.0, 8, 5), ExtendedBeta::infinity(), 3);
  CHECK(w == doctest::Approx(3 * std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("exact counts: trivial cases") {
  CHECK(count_paths_exact(random_env(1, 1.0, 8, 1), 3) == 27);
  CHECK(count_paths_exact(closed_slice_one(0.8, 8, 7), 4) == 0);
  CHECK(count_paths_exact(random_env(1, 0.5, 8, 1), 0) == 1);
}

TEST_CASE("recursions match the enumeration oracle") {
  const std::vector<ExtendedBeta> betas{ExtendedBeta(0.0), ExtendedBeta(0.5), ExtendedBeta(2.0),
                                        ExtendedBeta::infinity()};
  for (int d : {1, 2}) {
    const std::int64_t n = d == 1 ? 6 : 4;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Environment env = random_env(d, 0.6, n, child_seed(33, "oracle", seed));
      const BigInt exact = count_paths_exact(env, n);
      for (const auto& beta : betas) {
        const EnumerationResult oracle = enumerate_paths(env, beta, n);
        if (beta.is_infinite()) CHECK(oracle.open_paths == exact);
        const double dp = partition_log(env, beta, n);
        if (std::isinf(oracle.log_partition)) {
          CHECK(dp == oracle.log_partition);
        } else {
          CHECK(std::abs(dp - oracle.log_partition) <=
                1e-10 * std::max(1.0, std::abs(oracle.log_partition)));
        }
      }
    }
  }
}

TEST_CASE("enumeration oracle basics") {
  const EnumerationResult empty = enumerate_paths(random_env(1, 0.5, 4, 3), ExtendedBeta(1.0), 0,
                                                  {}, true);
  CHECK(empty.total_paths == 1);
  CHECK(empty.paths.size() == 1);
  CHECK(empty.log_partition == doctest::Approx(0.0));

  const EnumerationResult nine =
      enumerate_paths(random_env(1, 1.0, 4, 3), ExtendedBeta::infinity(), 2, {}, true);
  CHECK(nine.total_paths == 9);
  CHECK(nine.open_paths == 9);
  for (const auto& ep : nine.paths) CHECK(ep.energy == 0);

  CHECK_THROWS_AS(enumerate_paths(random_env(1, 0.5, 64, 3), ExtendedBeta(1.0), 40),
                  CapExceeded);
}

TEST_CASE("restricted partition sums") {
  const Environment env = random_env(1, 0.7, 16, 17);
  // empty time range: weight of the single empty path
  CHECK(restricted_partition_log(env, ExtendedBeta(1.0), 4, pos1(2), 4,
                                 TargetSet::of({pos1(2)})) == 0.0);
  CHECK(restricted_partition_log(env, ExtendedBeta(1.0), 4, pos1(2), 4,
                                 TargetSet::of({pos1(3)})) == -kInf);
  // all targets from the origin is the plain partition function
  for (const auto beta : {ExtendedBeta(0.7), ExtendedBeta::infinity()})
    CHECK(restricted_partition_log(env, beta, 0, kOrigin, 6, TargetSet::everything()) ==
          doctest::Approx(partition_log(env, beta, 6)).epsilon(1e-13));

  // singleton target against the enumeration oracle
  const std::int64_t m = 2, n = 5;
  const Position from = pos1(1), to = pos1(0);
  const ExtendedBeta beta(1.3);
  const EnumerationResult all =
      enumerate_paths(env, beta, n - m, LatticePoint{m, from}, true);
  long double sum = 0.0L;
  for (const auto& ep : all.paths)
    if (ep.path.positions.back() == to) sum += std::exp(-(long double)(beta.value()) * ep.energy);
  const double oracle = double(std::log(sum));
  CHECK(restricted_partition_log(env, beta, m, from, n, TargetSet::of({to})) ==
        doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("regularized log vanishes off the connection event") {
  const Environment dead = closed_slice_one(0.8, 16, 5);
  CHECK(regularized_log(dead, ExtendedBeta::infinity(), 6) == 0.0);
  CHECK(regularized_log(dead, ExtendedBeta(2.0), 6) == 0.0);

  const Environment live = random_env(1, 1.0, 16, 5);
  CHECK(regularized_log(live, ExtendedBeta(0.0), 4) ==
        doctest::Approx(4 * std::log(3.0)).epsilon(1e-12));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Environment env = random_env(1, 0.75, 8, child_seed(4, "reg", seed));
    const BigInt count = count_paths_exact(env, 8);
    const double reg = regularized_log(env, ExtendedBeta::infinity(), 8);
    if (count == 0)
      CHECK(reg == 0.0);
    else
      CHECK(reg == doctest::Approx(log_big(count)).epsilon(1e-10));
  }
}

TEST_CASE("partition is monotone in beta with the counting gap bound") {
  const std::int64_t n = 8;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Environment env = random_env(1, 0.7, n, child_seed(8, "mono", seed));
    double prev = partition_log(env, ExtendedBeta(0.0), n);
    CHECK(prev == doctest::Approx(n * std::log(3.0)).epsilon(1e-12));
    for (double b : {0.5, 1.0, 2.0, 5.0, 12.0}) {
      const double cur = partition_log(env, ExtendedBeta(b), n);
      CHECK(cur <= prev + 1e-9);
      prev = cur;
    }
    const double log_n = partition_log(env, ExtendedBeta::infinity(), n);
    CHECK(prev >= log_n - 1e-9);
    // 0 <= Z - N <= (2d+1)^n e^{-beta}
    for (double b : {5.0, 10.0}) {
      const double z = std::exp(partition_log(env, ExtendedBeta(b), n));
      const double cnt = std::isinf(log_n) ? 0.0 : std::exp(log_n);
      CHECK(z - cnt >= -1e-9 * std::max(1.0, z));
      CHECK(z - cnt <= std::pow(3.0, double(n)) * std::exp(-b) + 1e-9);
    }
  }
}

TEST_CASE("range bound on the connection event") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Environment env = random_env(1, 0.7, 10, child_seed(9, "range", seed));
    const double v = partition_log(env, ExtendedBeta::infinity(), 10);
    if (std::isinf(v)) continue;
    CHECK(v >= 0.0);
    CHECK(v <= 10 * std::log(3.0) + 1e-12);
  }
}

TEST_CASE("coupled environments order counts and partitions") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const UniformField f(child_seed(10, "cpl", seed), 1);
    auto [lo, hi] = coupled_pair(f, 0.55, 0.85, 8);
    CHECK(count_paths_exact(lo, 8) <= count_paths_exact(hi, 8));
    for (const auto beta : {ExtendedBeta(1.0), ExtendedBeta::infinity()}) {
      const double a = partition_log(lo, beta, 8);
      const double b = partition_log(hi, beta, 8);
      if (std::isinf(a))
        CHECK((std::isinf(b) ? a <= b || a == b : true));
      else
        CHECK(a <= b + 1e-9);
    }
  }
}

TEST_CASE("translation covariance is exact") {
  const Environment env = random_env(1, 0.6, 64, 1234);
  const std::int64_t dt = 5;
  const Position dx = pos1(3);
  const Environment moved = env.shifted(dt, dx);
  const double direct = partition_log(env, ExtendedBeta(1.5), 7, LatticePoint{dt, dx});
  const double shifted_v = partition_log(moved, ExtendedBeta(1.5), 7, LatticePoint{0, kOrigin});
  CHECK(direct == shifted_v);
  CHECK(count_paths_exact(env, 7, LatticePoint{dt, dx}) ==
        count_paths_exact(moved, 7, LatticePoint{0, kOrigin}));
}

TEST_CASE("argmax endpoint") {
  CHECK(argmax_endpoint(random_env(1, 1.0, 16, 2), 6) == kOrigin);  // symmetry + lex tie-break

  // open only along x(t) = t: unique surviving endpoint is m
  auto grid = std::make_shared<OpenGrid>();
  grid->d = 1;
  grid->t_lo = 0;
  grid->t_hi = 6;
  grid->box = Box::centered(1, kOrigin, 6);
  grid->open.assign(7 * grid->box.size(), 0);
  for (int t = 0; t <= 6; ++t)
    grid->open[std::size_t(t) * grid->box.size() + grid->box.index_of(pos1(t))] = 1;
  CHECK(argmax_endpoint(Environment::from_grid(grid, 6), 6) == pos1(6));

  CHECK_THROWS_AS(argmax_endpoint(closed_slice_one(0.8, 8, 3), 5), std::domain_error);

  // against enumerated endpoint counts
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Environment env = random_env(1, 0.75, 6, child_seed(11, "argmax", seed));
    const EnumerationResult all = enumerate_paths(env, ExtendedBeta::infinity(), 6, {}, true);
    if (all.open_paths == 0) continue;
    std::map<Position, std::int64_t> counts;
    for (const auto& ep : all.paths)
      if (ep.energy == 0) counts[ep.path.positions.back()]++;
    Position best = counts.begin()->first;
    for (const auto& [x, c] : counts)
      if (c > counts[best]) best = x;
    CHECK(argmax_endpoint(env, 6) == best);
  }
}

TEST_CASE("argmax midpoint") {
  CHECK(argmax_midpoint(random_env(1, 1.0, 16, 2), 4).x == kOrigin);

  auto grid = std::make_shared<OpenGrid>();  // single open corridor at x = 0
  grid->d = 1;
  grid->t_lo = 0;
  grid->t_hi = 8;
  grid->box = Box::centered(1, kOrigin, 8);
  grid->open.assign(9 * grid->box.size(), 0);
  for (int t = 0; t <= 8; ++t)
    grid->open[std::size_t(t) * grid->box.size() + grid->box.index_of(pos1(0))] = 1;
  const auto corridor = argmax_midpoint(Environment::from_grid(grid, 8), 4);
  CHECK(corridor.x == kOrigin);
  CHECK_FALSE(corridor.all_zero);
  CHECK(corridor.incoming == 1);
  CHECK(corridor.outgoing == 1);

  const auto dead = argmax_midpoint(closed_slice_one(0.8, 16, 3), 4);
  CHECK(dead.all_zero);

  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Environment env = random_env(1, 0.75, 8, child_seed(12, "mid", seed));
    const auto got = argmax_midpoint(env, 4);
    // oracle: enumerate both halves
    std::map<Position, std::int64_t> in, out;
    const auto half1 = enumerate_paths(env, ExtendedBeta::infinity(), 4, {}, true);
    for (const auto& ep : half1.paths)
      if (ep.energy == 0) in[ep.path.positions.back()]++;
    BigInt best = 0;
    Position best_x = pos1(-4);
    for (int x = -4; x <= 4; ++x) {
      const auto half2 =
          enumerate_paths(env, ExtendedBeta::infinity(), 4, LatticePoint{4, pos1(x)});
      const BigInt prod = BigInt(in.count(pos1(x)) ? in[pos1(x)] : 0) * half2.open_paths;
      if (prod > best) {
        best = prod;
        best_x = pos1(x);
      }
    }
    if (best == 0)
      CHECK(got.all_zero);
    else
      CHECK(got.x == best_x);
  }
}

TEST_CASE("resource caps raise instead of truncating") {
  const Environment env = random_env(1, 0.8, 64, 4);
  DpLimits tiny;
  tiny.max_cell_updates = 50;
  CHECK_THROWS_AS(partition_log(env, ExtendedBeta(1.0), 40, {}, tiny), CapExceeded);
  CHECK_THROWS_AS(count_paths_exact(env, 40, {}, tiny), CapExceeded);
}

TEST_CASE("log_big agrees with std::log on small values") {
  CHECK(log_big(BigInt(1)) == 0.0);
  CHECK(log_big(BigInt(720)) == doctest::Approx(std::log(720.0)).epsilon(1e-14));
  BigInt huge = 1;
  for (int i = 0; i < 400; ++i) huge *= 3;
  CHECK(log_big(huge) == doctest::Approx(400.0 * std::log(3.0)).epsilon(1e-12));
  CHECK(std::isinf(log_big(BigInt(0))));
}

TEST_CASE("extended beta parsing and formatting") {
  CHECK(ExtendedBeta::parse("inf").is_infinite());
  CHECK(ExtendedBeta::parse("2.5").value() == 2.5);
  CHECK(ExtendedBeta::parse("2.5").str() == "2.5");
  CHECK(ExtendedBeta::infinity().str() == "inf");
  CHECK_THROWS_AS(ExtendedBeta::parse("cold"), std::invalid_argument);
  CHECK_THROWS_AS(ExtendedBeta(-1.0), std::invalid_argument);
}
