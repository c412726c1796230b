#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "percolymer/estimate.hpp"

namespace percolymer {

// Fully resolved experiment configuration. Loaded from JSON (unknown keys
// rejected), overridden by CLI flags, and echoed verbatim into every
// JSON-lines record for provenance.
struct RunConfig {
  std::string experiment;
  int d = 1;
  double p = 0.8;
  std::string beta = "inf";  // decimal string or the literal "inf"
  std::vector<std::string> beta_list;
  std::int64_t n = 64;
  std::int64_t m = -1;  // additivity; defaults to n
  std::vector<std::int64_t> n_list;
  std::vector<double> p_list;
  std::vector<std::int64_t> scale_list;
  std::vector<std::int64_t> k_list;
  std::int64_t samples = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
  double delta = 0.2;
  double epsilon = 0.05;
  double tol = 0.02;
  std::int64_t horizon = 200;
  std::int64_t buffer = 64;
  std::string kind = "finite-cluster";
  std::int64_t ell = 0;  // event scale; 0 = floor((log n)^2)
  std::int64_t inner_samples = 160;
  double margin_c = 0.27;
  std::int64_t margin_pad = 60;  // survival-proxy horizon beyond frozen windows
  std::string out;  // output stem; writes <out>.csv and <out>.jsonl

  static RunConfig from_json(const nlohmann::json& j);
  void apply_overrides(const nlohmann::json& overrides);
  nlohmann::json to_json() const;
  void validate() const;
};

struct RunResult {
  int exit_code = 0;
  std::vector<EstimateRecord> records;
  std::string error;  // machine-readable error line when exit_code != 0
};

// Executes one experiment command, writes records to the configured sink, and
// prints a human-readable summary table. Exit codes: 0 ok, 2 invalid config,
// 3 resource cap, 4 zero acceptances, 1 anything else.
RunResult run(const std::string& command, RunConfig cfg, std::ostream& out);

// Groups result rows by (experiment, d, p, beta, n) and merges estimates by
// inverse-variance weighting; returns a plot-ready CSV. Truncated final lines
// are skipped with a warning; corrupt interior rows and schema mismatches are
// errors.
std::string summarize(const std::vector<std::string>& paths, std::ostream& table_out,
                      std::ostream& warn);

const std::vector<std::string>& known_commands();

}  // namespace percolymer
