#include "percolymer/polymer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace percolymer {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_big(const BigInt& v) {
  if (v < 0) throw std::invalid_argument("log_big: negative value");
  if (v == 0) return kNegInf;
  const unsigned bits = boost::multiprecision::msb(v) + 1;
  if (bits <= 1000) return std::log(v.convert_to<double>());
  const unsigned shift = bits - 53;
  const double mant = BigInt(v >> shift).convert_to<double>();
  return std::log(mant) + double(shift) * 0.6931471805599453094;
}

void Path::validate_steps() const {
  if (positions.empty()) throw std::invalid_argument("empty path");
  for (std::size_t i = 0; i + 1 < positions.size(); ++i)
    if (l1_dist(positions[i], positions[i + 1]) > 1)
      throw std::invalid_argument("path step exceeds l1 distance 1");
}

std::int64_t path_energy(const Environment& env, const Path& path, TimeWindow window) {
  if (window.after < path.start_time || window.upto > path.end_time())
    throw std::invalid_argument("energy interval outside path domain");
  std::int64_t h = 0;
  for (std::int64_t t = window.after + 1; t <= window.upto; ++t)
    if (!env.is_open(t, path.at(t))) ++h;
  return h;
}

LogSliceWeights forward_log_slice(const Environment& env, ExtendedBeta beta, std::int64_t from_t,
                                  const Position& from_x, std::int64_t to_t,
                                  const DpLimits& limits) {
  if (to_t < from_t) throw std::invalid_argument("forward recursion: to_t < from_t");
  const int d = env.dim();
  const std::int64_t cap = env.spatial_window();
  if (linf_norm(from_x) > cap) throw std::out_of_range("start outside spatial window");
  const auto offs = StepOffsets::for_dim(d);
  const bool zero_temp = beta.is_infinite();
  const double bval = beta.value();

  Box cur_box = Box::centered(d, from_x, 0);
  std::vector<double> cur{0.0};
  std::vector<double> next;
  std::int64_t cells = 0;

  for (std::int64_t t = from_t + 1; t <= to_t; ++t) {
    const Box nb = cur_box.expanded(1, cap);
    next.assign(nb.size(), kNegInf);
    cells += std::int64_t(next.size());
    if (cells > limits.max_cell_updates)
      throw CapExceeded("slice-cell cap exceeded in partition recursion");
    nb.for_each([&](const Position& y) {
      const bool open = env.is_open(t, y);
      double factor = 0.0;
      if (!open) {
        if (zero_temp) return;  // e^{-inf} = 0
        factor = -bval;
      }
      double vals[2 * kMaxDim + 1];
      int nv = 0;
      double m = kNegInf;
      int argmax = 0;
      for (int i = 0; i < offs.count; ++i) {
        const Position x = shifted(y, offs.off[i]);
        if (!cur_box.contains(x)) continue;
        const double v = cur[cur_box.index_of(x)];
        if (v == kNegInf) continue;
        if (v > m) {
          m = v;
          argmax = nv;
        }
        vals[nv++] = v;
      }
      if (nv == 0) return;
      double s = 1.0;
      for (int i = 0; i < nv; ++i)
        if (i != argmax) s += std::exp(vals[i] - m);
      next[nb.index_of(y)] = factor + m + std::log(s);
    });
    cur_box = nb;
    cur.swap(next);
  }
  return LogSliceWeights{to_t, cur_box, std::move(cur)};
}

ExactSliceWeights forward_count_slice(const Environment& env, std::int64_t from_t,
                                      const Position& from_x, std::int64_t to_t,
                                      const DpLimits& limits) {
  if (to_t < from_t) throw std::invalid_argument("forward recursion: to_t < from_t");
  const int d = env.dim();
  const std::int64_t cap = env.spatial_window();
  if (linf_norm(from_x) > cap) throw std::out_of_range("start outside spatial window");
  const auto offs = StepOffsets::for_dim(d);

  Box cur_box = Box::centered(d, from_x, 0);
  std::vector<BigInt> cur{BigInt(1)};
  std::vector<BigInt> next;
  std::int64_t cells = 0;

  for (std::int64_t t = from_t + 1; t <= to_t; ++t) {
    const Box nb = cur_box.expanded(1, cap);
    next.assign(nb.size(), BigInt(0));
    cells += std::int64_t(next.size());
    if (cells > limits.max_cell_updates)
      throw CapExceeded("slice-cell cap exceeded in exact count recursion");
    nb.for_each([&](const Position& y) {
      if (!env.is_open(t, y)) return;
      BigInt s = 0;
      for (int i = 0; i < offs.count; ++i) {
        const Position x = shifted(y, offs.off[i]);
        if (cur_box.contains(x)) s += cur[cur_box.index_of(x)];
      }
      next[nb.index_of(y)] = std::move(s);
    });
    cur_box = nb;
    cur.swap(next);
  }
  return ExactSliceWeights{to_t, cur_box, std::move(cur)};
}

ExactSliceWeights backward_count_slice(const Environment& env, std::int64_t t,
                                       const Box& support_at_t, std::int64_t to_t,
                                       const DpLimits& limits) {
  if (to_t < t) throw std::invalid_argument("backward recursion: to_t < t");
  const int d = env.dim();
  const std::int64_t cap = env.spatial_window();
  const auto offs = StepOffsets::for_dim(d);

  Box cur_box = support_at_t.expanded(to_t - t, cap);
  std::vector<BigInt> cur(cur_box.size(), BigInt(1));
  std::vector<BigInt> next;
  std::int64_t cells = 0;

  for (std::int64_t r = to_t - 1; r >= t; --r) {
    const Box nb = support_at_t.expanded(r - t, cap);
    next.assign(nb.size(), BigInt(0));
    cells += std::int64_t(next.size());
    if (cells > limits.max_cell_updates)
      throw CapExceeded("slice-cell cap exceeded in backward count recursion");
    nb.for_each([&](const Position& x) {
      BigInt s = 0;
      for (int i = 0; i < offs.count; ++i) {
        const Position y = shifted(x, offs.off[i]);
        if (cur_box.contains(y) && env.is_open(r + 1, y)) s += cur[cur_box.index_of(y)];
      }
      next[nb.index_of(x)] = std::move(s);
    });
    cur_box = nb;
    cur.swap(next);
  }
  return ExactSliceWeights{t, cur_box, std::move(cur)};
}

namespace {

double log_sum_slice(const LogSliceWeights& slice) {
  double m = kNegInf;
  for (double v : slice.values) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : slice.values)
    if (v != kNegInf) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double partition_log(const Environment& env, ExtendedBeta beta, std::int64_t n,
                     const LatticePoint& start, const DpLimits& limits) {
  if (n < 0) throw std::invalid_argument("negative path length");
  const auto slice = forward_log_slice(env, beta, start.t, start.x, start.t + n, limits);
  return log_sum_slice(slice);
}

BigInt count_paths_exact(const Environment& env, std::int64_t n, const LatticePoint& start,
                         const DpLimits& limits) {
  if (n < 0) throw std::invalid_argument("negative path length");
  const auto slice = forward_count_slice(env, start.t, start.x, start.t + n, limits);
  BigInt s = 0;
  for (const auto& v : slice.values) s += v;
  return s;
}

double restricted_partition_log(const Environment& env, ExtendedBeta beta, std::int64_t m,
                                const Position& x, std::int64_t n, const TargetSet& targets,
                                const DpLimits& limits) {
  if (m > n) throw std::invalid_argument("restricted partition: m > n");
  const auto slice = forward_log_slice(env, beta, m, x, n, limits);
  if (targets.all) return log_sum_slice(slice);
  double mx = kNegInf;
  std::vector<double> vals;
  vals.reserve(targets.points.size());
  for (const auto& y : targets.points) {
    if (!slice.support.contains(y)) continue;
    const double v = slice.values[slice.support.index_of(y)];
    if (v == kNegInf) continue;
    vals.push_back(v);
    mx = std::max(mx, v);
  }
  if (vals.empty()) return kNegInf;
  double s = 0.0;
  for (double v : vals) s += std::exp(v - mx);
  return mx + std::log(s);
}

double regularized_log(const Environment& env, ExtendedBeta beta, std::int64_t n,
                       const DpLimits& limits) {
  const double open_log = partition_log(env, ExtendedBeta::infinity(), n, {}, limits);
  if (open_log == kNegInf) return 0.0;  // (0,0) not connected to (n, Z^d)
  if (beta.is_infinite()) return open_log;
  return partition_log(env, beta, n, {}, limits);
}

Position argmax_endpoint(const Environment& env, std::int64_t m, const DpLimits& limits) {
  const auto slice = forward_count_slice(env, 0, kOrigin, m, limits);
  const BigInt* best = nullptr;
  Position best_x = kOrigin;
  slice.support.for_each([&](const Position& x) {
    const BigInt& v = slice.values[slice.support.index_of(x)];
    if (v > 0 && (best == nullptr || v > *best)) {  // lexicographic scan order breaks ties
      best = &slice.values[slice.support.index_of(x)];
      best_x = x;
    }
  });
  if (best == nullptr) throw std::domain_error("argmax_endpoint: start disconnected from (m, Z^d)");
  return best_x;
}

MidpointArgmax argmax_midpoint(const Environment& env, std::int64_t n, const DpLimits& limits) {
  const auto incoming = forward_count_slice(env, 0, kOrigin, n, limits);
  const auto outgoing = backward_count_slice(env, n, incoming.support, 2 * n, limits);
  MidpointArgmax result;
  result.all_zero = true;
  result.x = incoming.support.at(0);
  BigInt best = 0;
  incoming.support.for_each([&](const Position& x) {
    const BigInt prod = incoming.at(x) * outgoing.at(x);
    if (prod > best) {
      best = prod;
      result.x = x;
      result.all_zero = false;
    }
  });
  result.incoming = incoming.at(result.x);
  result.outgoing = outgoing.at(result.x);
  return result;
}

ExtendedBeta ExtendedBeta::parse(std::string_view s) {
  if (s == "inf" || s == "infinity" || s == "Inf") return infinity();
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(std::string(s), &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("cannot parse beta: " + std::string(s));
  }
  if (pos != s.size()) throw std::invalid_argument("cannot parse beta: " + std::string(s));
  return ExtendedBeta(v);
}

std::string ExtendedBeta::str() const {
  if (is_infinite()) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value_);
  return buf;
}

}  // namespace percolymer
