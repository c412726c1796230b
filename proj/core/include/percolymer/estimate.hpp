#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "percolymer/beta.hpp"
#include "percolymer/env.hpp"
#include "percolymer/errors.hpp"
#include "percolymer/events.hpp"
#include "percolymer/lattice.hpp"

namespace percolymer {

// One Monte Carlo estimate with its provenance. Bit-for-bit reproducible
// given (experiment, params, seed): per-sample streams come from derived
// seeds and the reduction runs in fixed sample order, so the thread count
// never changes the answer. wall_ms is the only nondeterministic field and
// is excluded from serialized data rows.
struct EstimateRecord {
  std::string experiment;
  int d = 1;
  double p = 0.0;
  ExtendedBeta beta = ExtendedBeta(0.0);
  std::int64_t n = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::int64_t samples = 0;   // drawn
  std::int64_t accepted = 0;  // passing the conditioning event
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

// Log-linear fit of failure frequencies against a scale, for the
// exponential-decay experiments. Only nonzero frequencies enter the fit; the
// confidence band is plain linear regression on the log counts.
struct DecayFit {
  std::string kind;
  std::vector<double> abscissae;
  std::vector<double> log_freq;
  std::vector<std::int64_t> hits;
  std::vector<std::int64_t> draws;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  bool degenerate = false;     // too few nonzero frequencies to fit
  bool non_decaying = false;   // fitted slope >= 0 (sub-critical misuse)
  double resolution_floor = 0.0;  // 1/samples, reported when all counts are zero
  std::string note;

  // Upper edge of the 95% confidence interval for the slope.
  double slope_ci95_upper() const { return slope + 1.959963984540054 * slope_stderr; }
};

// Knobs shared by the fluctuation experiments.
struct ExperimentConfig {
  double delta = 0.2;    // in (0, 1/2)
  double epsilon = 0.05; // distance from criticality (documentation)
  double r = 2.0;        // target polynomial order
  std::int64_t buffer = 64;
  void validate() const;
};

// a_n^beta: mean of log Z_n^beta over environments accepted by the
// conditioning event {(0,0) <-> (n, Z^d)}, by rejection sampling.
EstimateRecord conditional_mean_log(int d, double p, ExtendedBeta beta, std::int64_t n,
                                    std::int64_t samples, std::uint64_t seed, int threads = 0);

// a_n/n on the doubling ladder {n/4, n/2, n}; the returned stderr combines
// the statistical error at n with the ladder's successive differences, the
// finite-size analogue of the geometric-series extrapolation bound.
EstimateRecord free_energy_estimate(int d, double p, ExtendedBeta beta, std::int64_t n_max,
                                    std::int64_t samples, std::uint64_t seed, int threads = 0);

// Conditional frequency of |log Z_n - a_n| >= n^{1/2+delta}. Centering uses
// the same-run conditional mean; the resulting O(stderr) bias is recorded in
// extra rather than corrected.
EstimateRecord concentration_tail(int d, double p, ExtendedBeta beta, std::int64_t n, double delta,
                                  std::int64_t samples, std::uint64_t seed, int threads = 0);

// Regression slope of log Var(log Z_n | conn) against log n.
DecayFit variance_scaling_fit(int d, double p, ExtendedBeta beta,
                              const std::vector<std::int64_t>& n_list, std::int64_t samples,
                              std::uint64_t seed, int threads = 0);

// a_{m+n} - a_m - a_n with combined stderr; for m == n the sub-additive
// direction 2 a_n - a_{2n} is reported in extra as well.
EstimateRecord additivity_defect(int d, double p, ExtendedBeta beta, std::int64_t m,
                                 std::int64_t n, std::int64_t samples, std::uint64_t seed,
                                 int threads = 0);

// a_n^beta / n per beta over environments shared across the whole list (same
// seeds), so the coupled estimates are pointwise nonincreasing in beta.
std::vector<EstimateRecord> zero_temp_scan(int d, double p, std::int64_t n,
                                           const std::vector<ExtendedBeta>& beta_list,
                                           std::int64_t samples, std::uint64_t seed,
                                           int threads = 0);

// a_n(p)/n per p with one uniform field per sample shared across the p-grid;
// at beta = inf the per-sample regularized values are nondecreasing in p and
// violations (there must be none) are counted in extra.
std::vector<EstimateRecord> continuity_scan(int d, const std::vector<double>& p_list,
                                            std::int64_t n, ExtendedBeta beta,
                                            std::int64_t samples, std::uint64_t seed,
                                            int threads = 0);

enum class DecayKind { FiniteCluster, CoupledZone, LargeInitial, GoodEvent };

DecayKind parse_decay_kind(const std::string& name);
std::string decay_kind_name(DecayKind kind);

struct DecayConfig {
  std::int64_t buffer = 64;        // finite-cluster: extinction re-check depth
  std::int64_t horizon = 128;      // large-initial: survival proxy horizon
  double cone_speed = 0.0;         // coupled-zone: 0 means 1/(2d)
  MarginConfig margin;             // good-event kind
};

// Estimates the named failure frequency at each scale and fits log-frequency
// against the scale; slope is the (negated) decay-rate estimate.
DecayFit decay_experiment(DecayKind kind, int d, double p,
                          const std::vector<std::int64_t>& scale_list, std::int64_t samples,
                          std::uint64_t seed, const DecayConfig& cfg = {}, int threads = 0);

}  // namespace percolymer
