// Experiment driver for the oriented-percolation / directed-polymer library.
// Every subcommand resolves its configuration (JSON file, then flags), runs
// the experiment, prints a summary table, and appends CSV/JSON-lines records.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "percolymer/runner.hpp"

namespace {

struct FlagValues {
  std::string config_path;
  std::string out;
  std::string beta;
  std::string kind;
  std::string p_list;
  std::string beta_list;
  std::string n_list;
  std::string scale_list;
  std::string k_list;
  long long seed = -1;
  long long samples = -1;
  long long n = -1;
  long long m = -1;
  long long horizon = -1;
  long long buffer = -1;
  long long ell = -1;
  long long inner_samples = -1;
  int d = -1;
  int threads = -1;
  double p = -1.0;
  double delta = -1.0;
  double tol = -1.0;
  double margin_c = -1.0;
};

void add_common_flags(CLI::App* cmd, FlagValues& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override file values");
  cmd->add_option("--seed", f.seed, "master seed (64-bit)");
  cmd->add_option("--out", f.out, "output stem; writes <out>.csv and <out>.jsonl");
  cmd->add_option("--samples", f.samples, "Monte Carlo sample budget");
  cmd->add_option("--threads", f.threads,
                  "worker threads (0 = PERCOLYMER_THREADS or hardware)");
  cmd->add_option("--p", f.p, "open-site probability");
  cmd->add_option("--beta", f.beta, "inverse temperature (decimal or 'inf')");
  cmd->add_option("--n", f.n, "path length / horizon");
  cmd->add_option("--d", f.d, "lattice dimension (1..3)");
  cmd->add_option("--delta", f.delta, "fluctuation exponent offset, in (0, 1/2)");
}

nlohmann::json parse_list_json(const std::string& text, const char* what) {
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw std::runtime_error("not an array");
    return j;
  } catch (const std::exception&) {
    throw percolymer::ConfigError(std::string(what) + " must be a JSON array, e.g. [1,2,4]");
  }
}

nlohmann::json overrides_from_flags(const FlagValues& f) {
  nlohmann::json o = nlohmann::json::object();
  if (f.seed >= 0) o["seed"] = static_cast<std::uint64_t>(f.seed);
  if (!f.out.empty()) o["out"] = f.out;
  if (f.samples >= 0) o["samples"] = f.samples;
  if (f.threads >= 0) o["threads"] = f.threads;
  if (f.p >= 0.0) o["p"] = f.p;
  if (!f.beta.empty()) o["beta"] = f.beta;
  if (f.n >= 0) o["n"] = f.n;
  if (f.m >= 0) o["m"] = f.m;
  if (f.d >= 0) o["d"] = f.d;
  if (f.delta >= 0.0) o["delta"] = f.delta;
  if (f.tol >= 0.0) o["tol"] = f.tol;
  if (f.horizon >= 0) o["horizon"] = f.horizon;
  if (f.buffer >= 0) o["buffer"] = f.buffer;
  if (f.ell >= 0) o["ell"] = f.ell;
  if (f.inner_samples >= 0) o["inner_samples"] = f.inner_samples;
  if (f.margin_c >= 0.0) o["margin_c"] = f.margin_c;
  if (!f.kind.empty()) o["kind"] = f.kind;
  if (!f.p_list.empty()) o["p_list"] = parse_list_json(f.p_list, "--p-list");
  if (!f.beta_list.empty()) o["beta_list"] = parse_list_json(f.beta_list, "--beta-list");
  if (!f.n_list.empty()) o["n_list"] = parse_list_json(f.n_list, "--n-list");
  if (!f.scale_list.empty()) o["scale_list"] = parse_list_json(f.scale_list, "--scale-list");
  if (!f.k_list.empty()) o["k_list"] = parse_list_json(f.k_list, "--k-list");
  return o;
}

int run_command(const std::string& command, const FlagValues& f) {
  percolymer::RunConfig cfg;
  try {
    if (!f.config_path.empty()) {
      std::ifstream in(f.config_path);
      if (!in) throw percolymer::ConfigError("cannot open config file: " + f.config_path);
      nlohmann::json j;
      in >> j;
      cfg = percolymer::RunConfig::from_json(j);
    }
    cfg.apply_overrides(overrides_from_flags(f));
  } catch (const std::exception& ex) {
    nlohmann::json err;
    err["error"] = ex.what();
    err["exit_code"] = 2;
    std::cout << err.dump() << "\n";
    return 2;
  }
  return percolymer::run(command, cfg, std::cout).exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"percolymer: oriented-percolation and directed-polymer experiments"};
  app.require_subcommand(1);

  std::vector<std::pair<CLI::App*, FlagValues*>> cmds;
  std::vector<std::unique_ptr<FlagValues>> storage;

  for (const auto& name : percolymer::known_commands()) {
    auto* cmd = app.add_subcommand(name, "");
    storage.push_back(std::make_unique<FlagValues>());
    FlagValues& f = *storage.back();
    add_common_flags(cmd, f);
    if (name == "additivity") cmd->add_option("--m", f.m, "first block length (defaults to n)");
    if (name == "critical" || name == "decay" || name == "verify-events") {
      cmd->add_option("--tol", f.tol, "bisection resolution");
      cmd->add_option("--horizon", f.horizon, "survival horizon");
    }
    if (name == "decay") {
      cmd->add_option("--kind", f.kind,
                      "finite-cluster | coupled-zone | large-initial | good-event");
      cmd->add_option("--scale-list", f.scale_list, "scales, JSON array");
      cmd->add_option("--buffer", f.buffer, "extinction re-check depth");
    }
    if (name == "limit-beta") cmd->add_option("--beta-list", f.beta_list, "JSON array, may contain \"inf\"");
    if (name == "continuity") cmd->add_option("--p-list", f.p_list, "JSON array of p values");
    if (name == "variance") cmd->add_option("--n-list", f.n_list, "JSON array of lengths");
    if (name == "verify-events") {
      cmd->add_option("--k-list", f.k_list, "slice indices, JSON array");
      cmd->add_option("--ell", f.ell, "event scale (0 = floor((log n)^2))");
      cmd->add_option("--inner-samples", f.inner_samples, "margin resampling budget");
      cmd->add_option("--margin-c", f.margin_c, "good-event decay constant");
    }
    cmds.emplace_back(cmd, &f);
  }

  auto* sum = app.add_subcommand("summarize", "merge result files into a plot-ready CSV");
  std::vector<std::string> files;
  std::string sum_out;
  sum->add_option("files", files, "result CSV files")->required();
  sum->add_option("--out", sum_out, "write the merged CSV here");

  CLI11_PARSE(app, argc, argv);

  if (sum->parsed()) {
    try {
      const std::string csv = percolymer::summarize(files, std::cout, std::cerr);
      if (!sum_out.empty()) {
        std::ofstream out(sum_out);
        if (!out) throw percolymer::ConfigError("cannot open output: " + sum_out);
        out << csv;
      }
      return 0;
    } catch (const percolymer::ConfigError& ex) {
      nlohmann::json err;
      err["error"] = ex.what();
      err["exit_code"] = 2;
      std::cout << err.dump() << "\n";
      return 2;
    }
  }

  for (std::size_t i = 0; i < cmds.size(); ++i)
    if (cmds[i].first->parsed())
      return run_command(percolymer::known_commands()[i], *cmds[i].second);
  return 0;
}
