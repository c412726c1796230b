#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace percolymer {

// Spatial position in Z^d with d <= 3. Coordinates beyond the active
// dimension stay zero, so comparison and hashing are dimension-agnostic and
// lexicographic tie-breaking is just std::array ordering.
using Position = std::array<std::int32_t, 3>;

inline constexpr int kMaxDim = 3;

inline constexpr Position kOrigin{0, 0, 0};

inline std::int64_t l1_dist(const Position& a, const Position& b) {
  std::int64_t s = 0;
  for (int i = 0; i < kMaxDim; ++i) s += std::llabs(std::int64_t(a[i]) - b[i]);
  return s;
}

inline std::int64_t linf_norm(const Position& a) {
  std::int64_t m = 0;
  for (int i = 0; i < kMaxDim; ++i) {
    const std::int64_t v = std::llabs(std::int64_t(a[i]));
    if (v > m) m = v;
  }
  return m;
}

inline Position shifted(const Position& a, const Position& by) {
  Position r = a;
  for (int i = 0; i < kMaxDim; ++i) r[i] = std::int32_t(r[i] + by[i]);
  return r;
}

// Time-space point (t, x). Time is nonnegative everywhere in this library.
struct LatticePoint {
  std::int64_t t = 0;
  Position x = kOrigin;
};

// Half-open-on-the-left time interval (after, upto], matching the convention
// used by restricted energy sums.
struct TimeWindow {
  std::int64_t after = 0;
  std::int64_t upto = 0;
  std::int64_t length() const { return upto - after; }
  bool contains(std::int64_t t) const { return t > after && t <= upto; }
};

// Axis-aligned box of lattice positions, inclusive bounds. Dimensions beyond
// d are pinned to [0, 0] so that generic 3-loop iteration stays correct.
struct Box {
  int d = 1;
  Position lo = kOrigin;
  Position hi = kOrigin;

  static Box centered(int d, const Position& c, std::int64_t radius) {
    if (radius < 0) throw std::invalid_argument("Box: negative radius");
    Box b;
    b.d = d;
    for (int i = 0; i < d; ++i) {
      b.lo[i] = std::int32_t(c[i] - radius);
      b.hi[i] = std::int32_t(c[i] + radius);
    }
    return b;
  }

  static Box hull(int d, const std::vector<Position>& pts) {
    if (pts.empty()) throw std::invalid_argument("Box: empty hull");
    Box b;
    b.d = d;
    b.lo = b.hi = pts.front();
    for (const auto& p : pts) {
      for (int i = 0; i < d; ++i) {
        if (p[i] < b.lo[i]) b.lo[i] = p[i];
        if (p[i] > b.hi[i]) b.hi[i] = p[i];
      }
    }
    for (int i = d; i < kMaxDim; ++i) {
      b.lo[i] = 0;
      b.hi[i] = 0;
    }
    return b;
  }

  // Grow each active dimension by r, clamping coordinates into [-cap, cap].
  Box expanded(std::int64_t r, std::int64_t cap) const {
    Box b = *this;
    for (int i = 0; i < d; ++i) {
      std::int64_t lo64 = std::int64_t(lo[i]) - r;
      std::int64_t hi64 = std::int64_t(hi[i]) + r;
      if (lo64 < -cap) lo64 = -cap;
      if (hi64 > cap) hi64 = cap;
      b.lo[i] = std::int32_t(lo64);
      b.hi[i] = std::int32_t(hi64);
    }
    return b;
  }

  std::int64_t extent(int i) const { return std::int64_t(hi[i]) - lo[i] + 1; }

  std::size_t size() const {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) {
      if (hi[i] < lo[i]) return 0;
      n *= std::size_t(extent(i));
    }
    return n;
  }

  bool contains(const Position& p) const {
    for (int i = 0; i < kMaxDim; ++i)
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    return true;
  }

  // Row-major index over the active dimensions.
  std::size_t index_of(const Position& p) const {
    std::size_t idx = 0;
    for (int i = 0; i < d; ++i) idx = idx * std::size_t(extent(i)) + std::size_t(p[i] - lo[i]);
    return idx;
  }

  Position at(std::size_t idx) const {
    Position p = kOrigin;
    for (int i = d - 1; i >= 0; --i) {
      const std::size_t e = std::size_t(extent(i));
      p[i] = std::int32_t(lo[i] + std::int32_t(idx % e));
      idx /= e;
    }
    return p;
  }

  template <class F>
  void for_each(F&& fn) const {
    Position p = kOrigin;
    for (std::int64_t i0 = lo[0]; i0 <= hi[0]; ++i0) {
      p[0] = std::int32_t(i0);
      if (d >= 2) {
        for (std::int64_t i1 = lo[1]; i1 <= hi[1]; ++i1) {
          p[1] = std::int32_t(i1);
          if (d >= 3) {
            for (std::int64_t i2 = lo[2]; i2 <= hi[2]; ++i2) {
              p[2] = std::int32_t(i2);
              fn(p);
            }
          } else {
            fn(p);
          }
        }
      } else {
        fn(p);
      }
    }
  }
};

// The 2d+1 step offsets |delta|_1 <= 1 (including the zero step).
struct StepOffsets {
  int count = 0;
  std::array<Position, 2 * kMaxDim + 1> off{};

  static StepOffsets for_dim(int d) {
    StepOffsets s;
    s.off[s.count++] = kOrigin;
    for (int i = 0; i < d; ++i) {
      Position p = kOrigin;
      p[i] = 1;
      s.off[s.count++] = p;
      p[i] = -1;
      s.off[s.count++] = p;
    }
    return s;
  }
};

inline void require_dim(int d) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("dimension must be in {1,2,3}");
}

}  // namespace percolymer
