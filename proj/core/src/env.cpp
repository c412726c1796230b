#include "percolymer/env.hpp"

#include <algorithm>
#include <stdexcept>

namespace percolymer {

std::uint64_t child_seed(std::uint64_t parent, std::string_view role, std::uint64_t index) {
  std::uint64_t h = mix64(parent ^ 0xa0761d6478bd642fULL);
  for (unsigned char c : role) h = mix64(h ^ c);
  return mix64(h ^ index);
}

Environment::Environment(const UniformField& field, double open_prob, std::int64_t spatial_window) {
  if (open_prob < 0.0 || open_prob > 1.0) throw std::invalid_argument("open_prob outside [0,1]");
  if (spatial_window < 0) throw std::invalid_argument("negative spatial window");
  d_ = field.dim();
  window_ = spatial_window;
  EnvSegment seg;
  seg.source = EnvSegment::FieldSource{field, open_prob};
  plan_.push_back(std::move(seg));
}

Environment Environment::from_grid(std::shared_ptr<const OpenGrid> grid, std::int64_t spatial_window) {
  if (!grid) throw std::invalid_argument("null grid");
  require_dim(grid->d);
  Environment env;
  env.d_ = grid->d;
  env.window_ = spatial_window;
  EnvSegment seg;
  seg.source = std::move(grid);
  env.plan_.push_back(std::move(seg));
  return env;
}

bool Environment::is_open(std::int64_t t, const Position& x) const {
  if (t < 0) throw std::out_of_range("environment query at negative time");
  if (linf_norm(x) > window_) throw std::out_of_range("environment query outside spatial window");
  for (const auto& seg : plan_) {
    if (t < seg.t_lo || t > seg.t_hi) continue;
    const std::int64_t ts = t - seg.t_shift;
    Position xs = x;
    for (int i = 0; i < d_; ++i) xs[i] = std::int32_t(xs[i] - seg.x_shift[i]);
    if (const auto* fs = std::get_if<EnvSegment::FieldSource>(&seg.source))
      return fs->field.value(ts, xs) < fs->open_prob;
    return std::get<std::shared_ptr<const OpenGrid>>(seg.source)->is_open(ts, xs);
  }
  throw std::logic_error("splice plan has a gap");  // unreachable: plans partition [0, inf)
}

double Environment::open_prob() const {
  if (const auto* fs = std::get_if<EnvSegment::FieldSource>(&plan_.front().source))
    return fs->open_prob;
  return -1.0;
}

Environment Environment::with_window(std::int64_t w) const {
  if (w < 0) throw std::invalid_argument("negative spatial window");
  Environment env = *this;
  env.window_ = w;
  return env;
}

Environment Environment::shifted(std::int64_t dt, const Position& dx) const {
  Environment env;
  env.d_ = d_;
  env.window_ = std::max<std::int64_t>(0, window_ - linf_norm(dx));
  const auto max_t = std::numeric_limits<std::int64_t>::max();
  for (const auto& seg : plan_) {
    EnvSegment s = seg;
    s.t_lo = seg.t_lo - dt;
    s.t_hi = seg.t_hi == max_t ? max_t : seg.t_hi - dt;
    if (s.t_hi < 0) continue;
    if (s.t_lo < 0) s.t_lo = 0;
    s.t_shift = seg.t_shift - dt;
    for (int i = 0; i < d_; ++i) s.x_shift[i] = std::int32_t(s.x_shift[i] - dx[i]);
    env.plan_.push_back(std::move(s));
  }
  if (env.plan_.empty() || env.plan_.front().t_lo != 0)
    throw std::invalid_argument("shift leaves times near 0 uncovered");
  return env;
}

namespace {

// Append `plan` restricted to result times > from, with all times moved up by
// `delay` (result time = source plan time + delay).
void append_shifted(std::vector<EnvSegment>& out, const std::vector<EnvSegment>& plan,
                    std::int64_t delay, std::int64_t from, std::int64_t upto) {
  const auto max_t = std::numeric_limits<std::int64_t>::max();
  for (const auto& seg : plan) {
    EnvSegment s = seg;
    const std::int64_t lo = seg.t_lo + delay;
    const std::int64_t hi = seg.t_hi >= max_t - delay ? max_t : seg.t_hi + delay;
    s.t_lo = std::max(lo, from + 1);
    s.t_hi = std::min(hi, upto);
    if (s.t_lo > s.t_hi) continue;
    s.t_shift = seg.t_shift + delay;
    out.push_back(std::move(s));
  }
}

}  // namespace

Environment splice(const Environment& b, const Environment& e, std::int64_t k) {
  if (b.dim() != e.dim()) throw std::invalid_argument("splice: dimension mismatch");
  if (k < 0) throw std::invalid_argument("splice: negative time");
  Environment env;
  env.d_ = b.dim();
  env.window_ = std::min(b.spatial_window(), e.spatial_window());
  const auto max_t = std::numeric_limits<std::int64_t>::max();
  append_shifted(env.plan_, b.plan(), 0, -1, k);
  append_shifted(env.plan_, e.plan(), k, k, max_t);
  return env;
}

Environment splice_slab(const Environment& b, const Environment& sl, const Environment& e,
                        std::int64_t k, std::int64_t l) {
  if (b.dim() != sl.dim() || b.dim() != e.dim())
    throw std::invalid_argument("splice_slab: dimension mismatch");
  if (k < 0 || k > l) throw std::invalid_argument("splice_slab: requires 0 <= k <= l");
  Environment env;
  env.d_ = b.dim();
  env.window_ = std::min({b.spatial_window(), sl.spatial_window(), e.spatial_window()});
  const auto max_t = std::numeric_limits<std::int64_t>::max();
  append_shifted(env.plan_, b.plan(), 0, -1, k);
  append_shifted(env.plan_, sl.plan(), k, k, l);
  append_shifted(env.plan_, e.plan(), l, l, max_t);
  return env;
}

std::pair<Environment, Environment> coupled_pair(const UniformField& field, double p, double q,
                                                 std::int64_t spatial_window) {
  if (!(p <= q)) throw std::invalid_argument("coupled_pair: requires p <= q");
  return {Environment(field, p, spatial_window), Environment(field, q, spatial_window)};
}

EnvironmentWindow::EnvironmentWindow(Environment env, std::int64_t t_lo, std::int64_t t_hi)
    : env_(std::move(env)), t_lo_(t_lo), t_hi_(t_hi) {
  if (t_lo < 0 || t_lo > t_hi) throw std::invalid_argument("EnvironmentWindow: bad time range");
}

bool EnvironmentWindow::is_open(std::int64_t t, const Position& x) const {
  if (t < t_lo_ || t > t_hi_) throw std::out_of_range("query outside environment window");
  return env_.is_open(t, x);
}

}  // namespace percolymer
