#include "percolymer/estimate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "percolymer/perco.hpp"
#include "percolymer/polymer.hpp"
#include "percolymer/threading.hpp"

namespace percolymer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Environment sample_env(int d, double p, std::int64_t window, std::uint64_t seed, std::int64_t i) {
  return Environment(UniformField(child_seed(seed, "sample", std::uint64_t(i)), d), p, window);
}

struct MeanVar {
  std::int64_t count = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double variance = 0.0;
};

// Fixed-order, compensated reduction over the accepted flags/values so the
// result is independent of the thread count.
MeanVar reduce_accepted(const std::vector<std::uint8_t>& accepted,
                        const std::vector<double>& values) {
  MeanVar mv;
  long double sum = 0.0L;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!accepted[i]) continue;
    ++mv.count;
    sum += values[i];
  }
  if (mv.count == 0) return mv;
  mv.mean = double(sum / mv.count);
  long double ss = 0.0L;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!accepted[i]) continue;
    const long double dlt = (long double)(values[i]) - (long double)(mv.mean);
    ss += dlt * dlt;
  }
  if (mv.count > 1) {
    mv.variance = double(ss / (mv.count - 1));
    mv.stderr_ = std::sqrt(mv.variance / double(mv.count));
  }
  return mv;
}

double binomial_stderr(std::int64_t hits, std::int64_t trials) {
  if (trials <= 0) return 0.0;
  const double f = double(hits) / double(trials);
  return std::sqrt(f * (1.0 - f) / double(trials));
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  LineFit f;
  if (n < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - (f.intercept + f.slope * xs[i]);
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / double(n - 2) / sxx);
  }
  return f;
}

// One conditioned run: per-sample connectivity flag plus log Z values.
struct ConditionedRun {
  std::vector<std::uint8_t> accepted;
  std::vector<double> values;
  MeanVar stats;
};

ConditionedRun conditioned_log_run(int d, double p, ExtendedBeta beta, std::int64_t n,
                                   std::int64_t samples, std::uint64_t seed, int threads) {
  require_dim(d);
  if (samples < 1) throw std::invalid_argument("need samples >= 1");
  if (n < 0) throw std::invalid_argument("negative n");
  ConditionedRun run;
  run.accepted.assign(std::size_t(samples), 0);
  run.values.assign(std::size_t(samples), 0.0);
  parallel_for(samples, threads, [&](std::int64_t i) {
    const Environment env = sample_env(d, p, n, seed, i);
    if (!reach_forward(env, 0, {kOrigin}, n).any()) return;
    run.accepted[std::size_t(i)] = 1;
    run.values[std::size_t(i)] = partition_log(env, beta, n);
  });
  run.stats = reduce_accepted(run.accepted, run.values);
  if (run.stats.count == 0)
    throw ZeroAcceptance("no sample satisfied (0,0) <-> (n, Z^d); raise samples or p");
  return run;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("delta must lie in (0, 1/2)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(r > 0.0)) throw ConfigError("r must be positive");
}

EstimateRecord conditional_mean_log(int d, double p, ExtendedBeta beta, std::int64_t n,
                                    std::int64_t samples, std::uint64_t seed, int threads) {
  const auto t0 = Clock::now();
  const ConditionedRun run = conditioned_log_run(d, p, beta, n, samples, seed, threads);
  EstimateRecord rec;
  rec.experiment = "conditional-mean-log";
  rec.d = d;
  rec.p = p;
  rec.beta = beta;
  rec.n = n;
  rec.samples = samples;
  rec.accepted = run.stats.count;
  rec.seed = seed;
  rec.estimate = run.stats.mean;
  rec.stderr_ = run.stats.stderr_;
  rec.extra["acceptance_rate"] = double(run.stats.count) / double(samples);
  rec.wall_ms = elapsed_ms(t0);
  return rec;
}

EstimateRecord free_energy_estimate(int d, double p, ExtendedBeta beta, std::int64_t n_max,
                                    std::int64_t samples, std::uint64_t seed, int threads) {
  if (n_max < 8) throw std::invalid_argument("free_energy_estimate: n_max must be >= 8");
  const auto t0 = Clock::now();
  const std::vector<std::int64_t> ladder{n_max / 4, n_max / 2, n_max};
  std::vector<EstimateRecord> rungs;
  for (std::size_t i = 0; i < ladder.size(); ++i)
    rungs.push_back(conditional_mean_log(d, p, beta, ladder[i], samples,
                                         child_seed(seed, "ladder", i), threads));
  const double v1 = rungs[0].estimate / double(ladder[0]);
  const double v2 = rungs[1].estimate / double(ladder[1]);
  const double v3 = rungs[2].estimate / double(ladder[2]);
  const double stat = rungs[2].stderr_ / double(n_max);
  const double ladder_err = std::abs(v3 - v2) + std::abs(v2 - v1);

  EstimateRecord rec;
  rec.experiment = "free-energy";
  rec.d = d;
  rec.p = p;
  rec.beta = beta;
  rec.n = n_max;
  rec.samples = samples * std::int64_t(ladder.size());
  rec.accepted = rungs[2].accepted;
  rec.seed = seed;
  rec.estimate = v3;
  rec.stderr_ = stat + ladder_err;  // statistical + extrapolation parts
  rec.extra["ladder_n"] = ladder;
  rec.extra["ladder_rate"] = std::vector<double>{v1, v2, v3};
  rec.extra["stat_stderr"] = stat;
  rec.extra["ladder_err"] = ladder_err;
  rec.extra["accepted_per_rung"] =
      std::vector<std::int64_t>{rungs[0].accepted, rungs[1].accepted, rungs[2].accepted};
  rec.wall_ms = elapsed_ms(t0);
  return rec;
}

EstimateRecord concentration_tail(int d, double p, ExtendedBeta beta, std::int64_t n, double delta,
                                  std::int64_t samples, std::uint64_t seed, int threads) {
  if (!(delta > 0.0 && delta < 0.5))
    throw std::invalid_argument("concentration_tail: delta must lie in (0, 1/2)");
  const auto t0 = Clock::now();
  const ConditionedRun run = conditioned_log_run(d, p, beta, n, samples, seed, threads);
  const double threshold = std::pow(double(n), 0.5 + delta);
  std::int64_t tail = 0;
  long double centered_sum = 0.0L;
  for (std::size_t i = 0; i < run.values.size(); ++i) {
    if (!run.accepted[i]) continue;
    const double c = run.values[i] - run.stats.mean;
    centered_sum += c;
    if (std::abs(c) >= threshold) ++tail;
  }
  EstimateRecord rec;
  rec.experiment = "concentration";
  rec.d = d;
  rec.p = p;
  rec.beta = beta;
  rec.n = n;
  rec.samples = samples;
  rec.accepted = run.stats.count;
  rec.seed = seed;
  rec.estimate = double(tail) / double(run.stats.count);
  rec.stderr_ = binomial_stderr(tail, run.stats.count);
  rec.extra["delta"] = delta;
  rec.extra["threshold"] = threshold;
  rec.extra["conditional_mean"] = run.stats.mean;
  rec.extra["centering_residual"] = double(centered_sum / run.stats.count);
  rec.extra["tail_hits"] = tail;
  rec.wall_ms = elapsed_ms(t0);
  return rec;
}

DecayFit variance_scaling_fit(int d, double p, ExtendedBeta beta,
                              const std::vector<std::int64_t>& n_list, std::int64_t samples,
                              std::uint64_t seed, int threads) {
  if (n_list.size() < 4)
    throw std::invalid_argument("variance_scaling_fit: need a ladder of length >= 4");
  DecayFit fit;
  fit.kind = "variance-scaling";
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const ConditionedRun run = conditioned_log_run(d, p, beta, n_list[i], samples,
                                                   child_seed(seed, "var-rung", i), threads);
    fit.abscissae.push_back(double(n_list[i]));
    fit.hits.push_back(run.stats.count);
    fit.draws.push_back(samples);
    if (run.stats.variance > 0.0) {
      xs.push_back(std::log(double(n_list[i])));
      ys.push_back(std::log(run.stats.variance));
      fit.log_freq.push_back(std::log(run.stats.variance));
    } else {
      fit.log_freq.push_back(kNegInf);
    }
  }
  if (xs.size() < 2) {
    fit.degenerate = true;
    fit.note = "variance identically zero (deterministic log Z); no scaling fit";
    return fit;
  }
  const LineFit lf = fit_line(xs, ys);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.slope_stderr = lf.slope_stderr;
  fit.non_decaying = fit.slope >= 0.0;  // variance grows with n; informational here
  return fit;
}

EstimateRecord additivity_defect(int d, double p, ExtendedBeta beta, std::int64_t m,
                                 std::int64_t n, std::int64_t samples, std::uint64_t seed,
                                 int threads) {
  if (m > n) throw std::invalid_argument("additivity_defect: requires m <= n");
  const auto t0 = Clock::now();
  const EstimateRecord am =
      conditional_mean_log(d, p, beta, m, samples, child_seed(seed, "a_m", 0), threads);
  const EstimateRecord an =
      conditional_mean_log(d, p, beta, n, samples, child_seed(seed, "a_n", 1), threads);
  const EstimateRecord amn =
      conditional_mean_log(d, p, beta, m + n, samples, child_seed(seed, "a_mn", 2), threads);
  EstimateRecord rec;
  rec.experiment = "additivity";
  rec.d = d;
  rec.p = p;
  rec.beta = beta;
  rec.n = n;
  rec.samples = 3 * samples;
  rec.accepted = std::min({am.accepted, an.accepted, amn.accepted});
  rec.seed = seed;
  rec.estimate = amn.estimate - am.estimate - an.estimate;
  rec.stderr_ = std::sqrt(am.stderr_ * am.stderr_ + an.stderr_ * an.stderr_ +
                          amn.stderr_ * amn.stderr_);
  rec.extra["m"] = m;
  rec.extra["a_m"] = am.estimate;
  rec.extra["a_n"] = an.estimate;
  rec.extra["a_mn"] = amn.estimate;
  rec.extra["stderr_m"] = am.stderr_;
  rec.extra["stderr_n"] = an.stderr_;
  rec.extra["stderr_mn"] = amn.stderr_;
  if (m == n) rec.extra["defect_subadditive"] = -rec.estimate;  // 2 a_n - a_{2n}
  rec.wall_ms = elapsed_ms(t0);
  return rec;
}

std::vector<EstimateRecord> zero_temp_scan(int d, double p, std::int64_t n,
                                           const std::vector<ExtendedBeta>& beta_list,
                                           std::int64_t samples, std::uint64_t seed,
                                           int threads) {
  require_dim(d);
  if (beta_list.empty()) throw std::invalid_argument("zero_temp_scan: empty beta list");
  if (std::none_of(beta_list.begin(), beta_list.end(),
                   [](const ExtendedBeta& b) { return b.is_infinite(); }))
    throw std::invalid_argument("zero_temp_scan: beta list must include inf");
  const auto t0 = Clock::now();
  const std::size_t nb = beta_list.size();
  std::vector<std::uint8_t> accepted(std::size_t(samples), 0);
  std::vector<std::vector<double>> values(nb, std::vector<double>(std::size_t(samples), 0.0));
  std::vector<std::int64_t> violations_per_sample(std::size_t(samples), 0);

  parallel_for(samples, threads, [&](std::int64_t i) {
    const Environment env = sample_env(d, p, n, seed, i);
    if (!reach_forward(env, 0, {kOrigin}, n).any()) return;
    accepted[std::size_t(i)] = 1;
    for (std::size_t b = 0; b < nb; ++b)
      values[b][std::size_t(i)] = partition_log(env, beta_list[b], n);
    // shared environment: log Z must be nonincreasing along increasing beta
    for (std::size_t b = 0; b + 1 < nb; ++b) {
      if (beta_list[b + 1].value() >= beta_list[b].value() &&
          values[b + 1][std::size_t(i)] > values[b][std::size_t(i)] + 1e-9)
        ++violations_per_sample[std::size_t(i)];
    }
  });

  std::int64_t violations = 0;
  for (auto v : violations_per_sample) violations += v;
  std::vector<EstimateRecord> out;
  for (std::size_t b = 0; b < nb; ++b) {
    const MeanVar mv = reduce_accepted(accepted, values[b]);
    if (mv.count == 0) throw ZeroAcceptance("zero_temp_scan: no accepted sample");
    EstimateRecord rec;
    rec.experiment = "limit-beta";
    rec.d = d;
    rec.p = p;
    rec.beta = beta_list[b];
    rec.n = n;
    rec.samples = samples;
    rec.accepted = mv.count;
    rec.seed = seed;
    rec.estimate = mv.mean / double(n);
    rec.stderr_ = mv.stderr_ / double(n);
    rec.extra["beta_index"] = b;
    rec.extra["mean_log_z"] = mv.mean;
    rec.extra["monotonicity_violations"] = violations;
    rec.wall_ms = elapsed_ms(t0);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<EstimateRecord> continuity_scan(int d, const std::vector<double>& p_list,
                                            std::int64_t n, ExtendedBeta beta,
                                            std::int64_t samples, std::uint64_t seed,
                                            int threads) {
  require_dim(d);
  if (p_list.empty()) throw std::invalid_argument("continuity_scan: empty p list");
  if (!std::is_sorted(p_list.begin(), p_list.end()))
    throw std::invalid_argument("continuity_scan: p list must be sorted");
  const auto t0 = Clock::now();
  const std::size_t np = p_list.size();
  std::vector<std::vector<std::uint8_t>> accepted(np,
                                                  std::vector<std::uint8_t>(std::size_t(samples), 0));
  std::vector<std::vector<double>> values(np, std::vector<double>(std::size_t(samples), 0.0));
  std::vector<std::int64_t> violations_per_sample(std::size_t(samples), 0);

  parallel_for(samples, threads, [&](std::int64_t i) {
    const UniformField field(child_seed(seed, "sample", std::uint64_t(i)), d);
    double prev_reg = kNegInf;
    for (std::size_t j = 0; j < np; ++j) {
      const Environment env(field, p_list[j], n);
      const bool conn = reach_forward(env, 0, {kOrigin}, n).any();
      double reg = 0.0;
      if (conn) {
        accepted[j][std::size_t(i)] = 1;
        values[j][std::size_t(i)] = partition_log(env, beta, n);
        reg = beta.is_infinite() ? values[j][std::size_t(i)] : 0.0;
      }
      if (beta.is_infinite()) {
        if (j > 0 && reg < prev_reg - 1e-9) ++violations_per_sample[std::size_t(i)];
        prev_reg = reg;
      }
    }
  });

  std::int64_t violations = 0;
  for (auto v : violations_per_sample) violations += v;
  std::vector<EstimateRecord> out;
  for (std::size_t j = 0; j < np; ++j) {
    const MeanVar mv = reduce_accepted(accepted[j], values[j]);
    EstimateRecord rec;
    rec.experiment = "continuity";
    rec.d = d;
    rec.p = p_list[j];
    rec.beta = beta;
    rec.n = n;
    rec.samples = samples;
    rec.accepted = mv.count;
    rec.seed = seed;
    rec.estimate = mv.count > 0 ? mv.mean / double(n) : 0.0;
    rec.stderr_ = mv.count > 0 ? mv.stderr_ / double(n) : 0.0;
    rec.extra["p_index"] = j;
    rec.extra["monotonicity_violations"] = violations;
    if (mv.count == 0) rec.extra["empty"] = true;
    rec.wall_ms = elapsed_ms(t0);
    out.push_back(std::move(rec));
  }
  return out;
}

DecayKind parse_decay_kind(const std::string& name) {
  if (name == "finite-cluster") return DecayKind::FiniteCluster;
  if (name == "coupled-zone") return DecayKind::CoupledZone;
  if (name == "large-initial") return DecayKind::LargeInitial;
  if (name == "good-event") return DecayKind::GoodEvent;
  throw ConfigError("unknown decay kind: " + name);
}

std::string decay_kind_name(DecayKind kind) {
  switch (kind) {
    case DecayKind::FiniteCluster: return "finite-cluster";
    case DecayKind::CoupledZone: return "coupled-zone";
    case DecayKind::LargeInitial: return "large-initial";
    case DecayKind::GoodEvent: return "good-event";
  }
  return "?";
}

DecayFit decay_experiment(DecayKind kind, int d, double p,
                          const std::vector<std::int64_t>& scale_list, std::int64_t samples,
                          std::uint64_t seed, const DecayConfig& cfg, int threads) {
  require_dim(d);
  if (scale_list.empty()) throw std::invalid_argument("decay_experiment: empty scale list");
  if (!std::is_sorted(scale_list.begin(), scale_list.end()))
    throw std::invalid_argument("decay_experiment: scales must increase");
  DecayFit fit;
  fit.kind = decay_kind_name(kind);

  for (std::size_t si = 0; si < scale_list.size(); ++si) {
    const std::int64_t scale = scale_list[si];
    std::vector<std::uint8_t> hit(std::size_t(samples), 0);
    const std::uint64_t scale_seed = child_seed(seed, "decay-scale", si);
    parallel_for(samples, threads, [&](std::int64_t i) {
      switch (kind) {
        case DecayKind::FiniteCluster: {
          const Environment env = sample_env(d, p, scale + cfg.buffer, scale_seed, i);
          const ReachSet at_scale = reach_forward(env, 0, {kOrigin}, scale);
          if (!at_scale.any()) return;
          if (!evolve_front(env, at_scale, scale + cfg.buffer).any()) hit[std::size_t(i)] = 1;
          return;
        }
        case DecayKind::CoupledZone: {
          const Environment env = sample_env(d, p, 2 * scale, scale_seed, i);
          if (!reach_forward(env, 0, {kOrigin}, scale).any()) return;
          CoupledZoneParams params = CoupledZoneParams::for_dim(d);
          if (cfg.cone_speed > 0.0) params.v = cfg.cone_speed;
          if (!coupled_zone_check(env, 0, kOrigin, scale, params)) hit[std::size_t(i)] = 1;
          return;
        }
        case DecayKind::LargeInitial: {
          const Environment env = sample_env(d, p, cfg.horizon + scale, scale_seed, i);
          std::vector<Position> A;
          for (std::int64_t j = 0; j < scale; ++j) {
            Position pt = kOrigin;
            pt[0] = std::int32_t(j);
            A.push_back(pt);
          }
          if (!reach_forward(env, 0, A, cfg.horizon).any()) hit[std::size_t(i)] = 1;
          return;
        }
        case DecayKind::GoodEvent: {
          const Environment env =
              sample_env(d, p, scale + cfg.margin.horizon_pad, scale_seed, i);
          if (!reach_forward(env, 0, {kOrigin}, scale).any()) return;
          MarginConfig mc = cfg.margin;
          mc.seed = child_seed(scale_seed, "margin", std::uint64_t(i));
          if (!good_point(env, 0, kOrigin, scale, mc).good) hit[std::size_t(i)] = 1;
          return;
        }
      }
    });
    std::int64_t hits = 0;
    for (auto h : hit) hits += h;
    fit.abscissae.push_back(double(scale));
    fit.hits.push_back(hits);
    fit.draws.push_back(samples);
    fit.log_freq.push_back(hits > 0 ? std::log(double(hits) / double(samples)) : kNegInf);
  }

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < fit.abscissae.size(); ++i) {
    if (fit.hits[i] > 0) {
      xs.push_back(fit.abscissae[i]);
      ys.push_back(fit.log_freq[i]);
    }
  }
  if (xs.empty()) {
    fit.degenerate = true;
    fit.resolution_floor = 1.0 / double(samples);
    fit.note = "all frequencies zero at every scale; decay below resolution floor";
    return fit;
  }
  if (xs.size() < 2) {
    fit.degenerate = true;
    fit.resolution_floor = 1.0 / double(samples);
    fit.note = "fewer than two nonzero frequencies; no fit";
    return fit;
  }
  const LineFit lf = fit_line(xs, ys);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.slope_stderr = lf.slope_stderr;
  if (fit.slope >= 0.0) {
    fit.non_decaying = true;
    fit.note = "fitted slope is not negative; parameters likely sub-critical for this event";
  }
  return fit;
}

}  // namespace percolymer
