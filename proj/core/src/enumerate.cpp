#include "percolymer/enumerate.hpp"

#include <cmath>
#include <limits>

namespace percolymer {

EnumerationResult enumerate_paths(const Environment& env, ExtendedBeta beta, std::int64_t n,
                                  const LatticePoint& start, bool keep_paths,
                                  std::int64_t max_paths) {
  if (n < 0) throw std::invalid_argument("negative path length");
  const int d = env.dim();
  BigInt budget = 1;
  for (std::int64_t i = 0; i < n; ++i) budget *= 2 * d + 1;
  if (budget > max_paths) throw CapExceeded("enumeration oracle cap exceeded");

  const auto offs = StepOffsets::for_dim(d);
  const std::int64_t window = env.spatial_window();
  const bool zero_temp = beta.is_infinite();

  // e^{-beta h} for every possible energy, accumulated in long double.
  std::vector<long double> weight(std::size_t(n) + 1, 1.0L);
  if (!zero_temp)
    for (std::int64_t h = 1; h <= n; ++h)
      weight[std::size_t(h)] = std::exp(-(long double)(beta.value()) * (long double)(h));

  EnumerationResult result;
  long double total = 0.0L;

  std::vector<Position> walk(std::size_t(n) + 1, start.x);
  auto descend = [&](auto&& self, std::int64_t depth, std::int64_t energy) -> void {
    if (depth == n) {
      result.total_paths += 1;
      if (energy == 0) result.open_paths += 1;
      total += zero_temp ? (energy == 0 ? 1.0L : 0.0L) : weight[std::size_t(energy)];
      if (keep_paths) {
        Path p;
        p.start_time = start.t;
        p.positions = walk;
        result.paths.push_back({std::move(p), energy});
      }
      return;
    }
    const std::int64_t t = start.t + depth + 1;
    for (int i = 0; i < offs.count; ++i) {
      const Position y = shifted(walk[std::size_t(depth)], offs.off[i]);
      if (linf_norm(y) > window) continue;  // confined to the spatial window, same as the DP
      walk[std::size_t(depth) + 1] = y;
      self(self, depth + 1, energy + (env.is_open(t, y) ? 0 : 1));
    }
  };
  descend(descend, 0, 0);

  result.log_partition =
      total > 0.0L ? double(std::log(total)) : -std::numeric_limits<double>::infinity();
  return result;
}

}  // namespace percolymer
