#include "percolymer/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "percolymer/enumerate.hpp"
#include "percolymer/perco.hpp"
#include "percolymer/records.hpp"

namespace percolymer {

namespace {

std::vector<std::int64_t> to_int_list(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + " must be an array of integers");
  std::vector<std::int64_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError(key + " must contain integers");
    out.push_back(e.get<std::int64_t>());
  }
  return out;
}

std::vector<double> to_double_list(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(key + " must contain numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::string beta_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return ExtendedBeta(v.get<double>()).str();
  throw ConfigError("beta must be a number or the string \"inf\"");
}

void assign_key(RunConfig& c, const std::string& key, const nlohmann::json& v) {
  auto need_int = [&](const char* what) {
    if (!v.is_number_integer()) throw ConfigError(std::string(what) + " must be an integer");
    return v.get<std::int64_t>();
  };
  auto need_num = [&](const char* what) {
    if (!v.is_number()) throw ConfigError(std::string(what) + " must be a number");
    return v.get<double>();
  };
  auto need_str = [&](const char* what) {
    if (!v.is_string()) throw ConfigError(std::string(what) + " must be a string");
    return v.get<std::string>();
  };
  if (key == "experiment") c.experiment = need_str("experiment");
  else if (key == "d") c.d = int(need_int("d"));
  else if (key == "p") c.p = need_num("p");
  else if (key == "beta") c.beta = beta_to_string(v);
  else if (key == "beta_list") {
    if (!v.is_array()) throw ConfigError("beta_list must be an array");
    c.beta_list.clear();
    for (const auto& e : v) c.beta_list.push_back(beta_to_string(e));
  } else if (key == "n") c.n = need_int("n");
  else if (key == "m") c.m = need_int("m");
  else if (key == "n_list") c.n_list = to_int_list(v, "n_list");
  else if (key == "p_list") c.p_list = to_double_list(v, "p_list");
  else if (key == "scale_list") c.scale_list = to_int_list(v, "scale_list");
  else if (key == "k_list") c.k_list = to_int_list(v, "k_list");
  else if (key == "samples") c.samples = need_int("samples");
  else if (key == "seed") {
    if (!v.is_number_unsigned() && !v.is_number_integer())
      throw ConfigError("seed must be an unsigned integer");
    c.seed = v.get<std::uint64_t>();
  } else if (key == "threads") c.threads = int(need_int("threads"));
  else if (key == "delta") c.delta = need_num("delta");
  else if (key == "epsilon") c.epsilon = need_num("epsilon");
  else if (key == "tol") c.tol = need_num("tol");
  else if (key == "horizon") c.horizon = need_int("horizon");
  else if (key == "buffer") c.buffer = need_int("buffer");
  else if (key == "kind") c.kind = need_str("kind");
  else if (key == "ell") c.ell = need_int("ell");
  else if (key == "inner_samples") c.inner_samples = need_int("inner_samples");
  else if (key == "margin_c") c.margin_c = need_num("margin_c");
  else if (key == "margin_pad") c.margin_pad = need_int("margin_pad");
  else if (key == "out") c.out = need_str("out");
  else throw ConfigError("unknown configuration key: " + key);
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.apply_overrides(j);
  return c;
}

void RunConfig::apply_overrides(const nlohmann::json& overrides) {
  if (!overrides.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : overrides.items()) assign_key(*this, key, value);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["d"] = d;
  j["p"] = p;
  j["beta"] = beta;
  if (!beta_list.empty()) j["beta_list"] = beta_list;
  j["n"] = n;
  if (m >= 0) j["m"] = m;
  if (!n_list.empty()) j["n_list"] = n_list;
  if (!p_list.empty()) j["p_list"] = p_list;
  if (!scale_list.empty()) j["scale_list"] = scale_list;
  if (!k_list.empty()) j["k_list"] = k_list;
  j["samples"] = samples;
  j["seed"] = seed;
  j["threads"] = threads;
  j["delta"] = delta;
  j["epsilon"] = epsilon;
  j["tol"] = tol;
  j["horizon"] = horizon;
  j["buffer"] = buffer;
  j["kind"] = kind;
  j["ell"] = ell;
  j["inner_samples"] = inner_samples;
  j["margin_c"] = margin_c;
  j["margin_pad"] = margin_pad;
  if (!out.empty()) j["out"] = out;
  return j;
}

void RunConfig::validate() const {
  if (d < 1 || d > 3) throw ConfigError("d must be 1, 2 or 3");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0,1]");
  for (double q : p_list)
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("p_list entries must lie in [0,1]");
  if (n < 0) throw ConfigError("n must be nonnegative");
  if (samples < 1) throw ConfigError("samples must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (inner_samples < 1) throw ConfigError("inner_samples must be >= 1");
  try {
    (void)ExtendedBeta::parse(beta);
    for (const auto& b : beta_list) (void)ExtendedBeta::parse(b);
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
}

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds{
      "free-energy", "concentration", "variance",      "additivity", "limit-beta",
      "continuity",  "decay",         "verify-events", "critical",   "oracle-check"};
  return cmds;
}

namespace {

EstimateRecord fit_to_record(const std::string& experiment, const RunConfig& cfg,
                             const DecayFit& fit) {
  EstimateRecord rec;
  rec.experiment = experiment;
  rec.d = cfg.d;
  rec.p = cfg.p;
  rec.beta = ExtendedBeta::parse(cfg.beta);
  rec.n = fit.abscissae.empty() ? cfg.n : std::int64_t(fit.abscissae.back());
  rec.samples = cfg.samples * std::int64_t(fit.abscissae.size());
  rec.accepted = rec.samples;
  rec.seed = cfg.seed;
  rec.estimate = fit.slope;
  rec.stderr_ = fit.slope_stderr;
  rec.extra["kind"] = fit.kind;
  rec.extra["abscissae"] = fit.abscissae;
  rec.extra["hits"] = fit.hits;
  rec.extra["draws"] = fit.draws;
  rec.extra["intercept"] = fit.intercept;
  rec.extra["degenerate"] = fit.degenerate;
  rec.extra["non_decaying"] = fit.non_decaying;
  if (fit.degenerate) rec.extra["resolution_floor"] = fit.resolution_floor;
  if (!fit.note.empty()) rec.extra["note"] = fit.note;
  return rec;
}

std::vector<EstimateRecord> run_verify_events(const RunConfig& cfg) {
  const std::int64_t ell =
      cfg.ell > 0 ? cfg.ell : ScaleParams::for_length(std::max<std::int64_t>(2, cfg.n)).ell;
  const ScaleParams scale = ScaleParams::with_ell(cfg.n, ell);
  std::vector<std::int64_t> ks = cfg.k_list;
  if (ks.empty()) {
    ks = {scale.ell2() + 1, cfg.n / 2, cfg.n - scale.ell2()};
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  }
  for (auto k : ks)
    if (k < 1 || k > cfg.n) throw ConfigError("verify-events: k out of range");

  std::map<std::string, std::int64_t> holds, total;
  std::int64_t witness_checked = 0, witness_failed = 0;
  MarginConfig margins;
  margins.c = cfg.margin_c;
  margins.inner_samples = cfg.inner_samples;
  margins.horizon_pad = cfg.margin_pad;

  for (std::int64_t inst = 0; inst < cfg.samples; ++inst) {
    const std::uint64_t s = child_seed(cfg.seed, "verify", std::uint64_t(inst));
    const std::int64_t window = cfg.n + scale.ell2() + 2;
    const Environment b(UniformField(child_seed(s, "b", 0), cfg.d), cfg.p, window);
    const Environment sl(UniformField(child_seed(s, "sl", 0), cfg.d), cfg.p, window);
    const Environment e(UniformField(child_seed(s, "e", 0), cfg.d), cfg.p, window);
    margins.seed = child_seed(s, "margins", 0);
    for (const std::int64_t k : ks) {
      const EventReport ra = check_a_repair(b, sl, e, scale, k, 4);
      ++total["a_repair"];
      holds["a_repair"] += ra.holds;
      for (const auto& w : ra.repairs) {
        ++witness_checked;
        if (!verify_repair_witness(b, sl, e, scale, k, w, false).empty()) ++witness_failed;
      }
      const EventReport rb =
          check_b_repair(b, sl, e, scale, k, 4, child_seed(s, "witness", std::uint64_t(k)));
      ++total["b_repair"];
      holds["b_repair"] += rb.holds;
      for (const auto& w : rb.repairs) {
        ++witness_checked;
        if (!verify_repair_witness(b, sl, e, scale, k, w, true).empty()) ++witness_failed;
      }
      if (k >= scale.ell2() && k <= cfg.n) {
        const EventReport rc = check_a_conn(b, scale, k, margins);
        ++total["a_conn"];
        holds["a_conn"] += rc.holds;
        const EventReport rd = check_b_conn(b, scale, k, margins);
        ++total["b_conn"];
        holds["b_conn"] += rd.holds;
        const EventReport re = check_a_bar(b, scale, k, margins);
        ++total["a_bar"];
        holds["a_bar"] += re.holds;
        const EventReport rf = check_b_bar(b, scale, k, margins);
        ++total["b_bar"];
        holds["b_bar"] += rf.holds;
      }
    }
  }

  std::vector<EstimateRecord> out;
  for (const auto& [event, tot] : total) {
    EstimateRecord rec;
    rec.experiment = "verify-events";
    rec.d = cfg.d;
    rec.p = cfg.p;
    rec.beta = ExtendedBeta::infinity();
    rec.n = cfg.n;
    rec.samples = tot;
    rec.accepted = holds[event];
    rec.seed = cfg.seed;
    rec.estimate = double(holds[event]) / double(tot);
    rec.stderr_ = 0.0;
    rec.extra["event"] = event;
    rec.extra["ell"] = ell;
    rec.extra["k_list"] = ks;
    rec.extra["witness_checked"] = witness_checked;
    rec.extra["witness_failed"] = witness_failed;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<EstimateRecord> run_oracle_check(const RunConfig& cfg) {
  const std::vector<ExtendedBeta> betas{ExtendedBeta(0.0), ExtendedBeta(0.5), ExtendedBeta(2.0),
                                        ExtendedBeta::infinity()};
  std::int64_t matches = 0;
  for (std::int64_t i = 0; i < cfg.samples; ++i) {
    const Environment env(UniformField(child_seed(cfg.seed, "oracle", std::uint64_t(i)), cfg.d),
                          cfg.p, cfg.n);
    bool ok = true;
    const BigInt exact = count_paths_exact(env, cfg.n);
    for (const auto& beta : betas) {
      const EnumerationResult oracle = enumerate_paths(env, beta, cfg.n);
      if (beta.is_infinite() && oracle.open_paths != exact) ok = false;
      const double dp = partition_log(env, beta, cfg.n);
      if (std::isinf(oracle.log_partition) || std::isinf(dp)) {
        if (dp != oracle.log_partition) ok = false;
      } else if (std::abs(dp - oracle.log_partition) >
                 1e-10 * std::max(1.0, std::abs(oracle.log_partition))) {
        ok = false;
      }
    }
    matches += ok;
  }
  EstimateRecord rec;
  rec.experiment = "oracle-check";
  rec.d = cfg.d;
  rec.p = cfg.p;
  rec.beta = ExtendedBeta::infinity();
  rec.n = cfg.n;
  rec.samples = cfg.samples;
  rec.accepted = matches;
  rec.seed = cfg.seed;
  rec.estimate = double(matches) / double(cfg.samples);
  rec.stderr_ = 0.0;
  rec.extra["summary"] =
      std::to_string(matches) + "/" + std::to_string(cfg.samples) + " exact matches";
  return {rec};
}

std::vector<EstimateRecord> dispatch(const std::string& command, const RunConfig& cfg) {
  const ExtendedBeta beta = ExtendedBeta::parse(cfg.beta);
  if (command == "free-energy") {
    if (cfg.n < 8) throw ConfigError("free-energy requires n >= 8");
    return {free_energy_estimate(cfg.d, cfg.p, beta, cfg.n, cfg.samples, cfg.seed, cfg.threads)};
  }
  if (command == "concentration") {
    if (!(cfg.delta > 0.0 && cfg.delta < 0.5)) throw ConfigError("delta must lie in (0, 1/2)");
    return {concentration_tail(cfg.d, cfg.p, beta, cfg.n, cfg.delta, cfg.samples, cfg.seed,
                               cfg.threads)};
  }
  if (command == "variance") {
    const std::vector<std::int64_t> ns =
        cfg.n_list.empty() ? std::vector<std::int64_t>{64, 128, 256, 512} : cfg.n_list;
    return {fit_to_record("variance", cfg,
                          variance_scaling_fit(cfg.d, cfg.p, beta, ns, cfg.samples, cfg.seed,
                                               cfg.threads))};
  }
  if (command == "additivity") {
    const std::int64_t m = cfg.m >= 0 ? cfg.m : cfg.n;
    return {additivity_defect(cfg.d, cfg.p, beta, m, cfg.n, cfg.samples, cfg.seed, cfg.threads)};
  }
  if (command == "limit-beta") {
    std::vector<ExtendedBeta> betas;
    if (cfg.beta_list.empty())
      betas = {ExtendedBeta(0.0), ExtendedBeta(1.0), ExtendedBeta(2.0), ExtendedBeta(4.0),
               ExtendedBeta(8.0), ExtendedBeta::infinity()};
    else
      for (const auto& s : cfg.beta_list) betas.push_back(ExtendedBeta::parse(s));
    return zero_temp_scan(cfg.d, cfg.p, cfg.n, betas, cfg.samples, cfg.seed, cfg.threads);
  }
  if (command == "continuity") {
    if (cfg.p_list.empty()) throw ConfigError("continuity requires p_list");
    return continuity_scan(cfg.d, cfg.p_list, cfg.n, beta, cfg.samples, cfg.seed, cfg.threads);
  }
  if (command == "decay") {
    // Defaults reflect how fast each event decays at p well above critical:
    // cluster death and initial-set extinction are steep, the coupled-zone
    // failure shallow.
    std::vector<std::int64_t> scales = cfg.scale_list;
    if (scales.empty()) {
      const DecayKind k = parse_decay_kind(cfg.kind);
      if (k == DecayKind::CoupledZone) scales = {8, 12, 16, 20};
      else if (k == DecayKind::GoodEvent) scales = {2, 4, 6, 8};
      else scales = {1, 2, 3, 4};
    }
    DecayConfig dc;
    dc.buffer = cfg.buffer;
    dc.horizon = cfg.horizon;
    dc.margin.c = cfg.margin_c;
    dc.margin.inner_samples = cfg.inner_samples;
    dc.margin.horizon_pad = cfg.margin_pad;
    return {fit_to_record("decay", cfg,
                          decay_experiment(parse_decay_kind(cfg.kind), cfg.d, cfg.p, scales,
                                           cfg.samples, cfg.seed, dc, cfg.threads))};
  }
  if (command == "verify-events") return run_verify_events(cfg);
  if (command == "critical") {
    const double pc =
        critical_estimate(cfg.d, cfg.horizon, cfg.samples, cfg.tol, cfg.seed, 0.5, cfg.threads);
    EstimateRecord rec;
    rec.experiment = "critical";
    rec.d = cfg.d;
    rec.p = pc;
    rec.beta = ExtendedBeta::infinity();
    rec.n = cfg.horizon;
    rec.samples = cfg.samples;
    rec.accepted = cfg.samples;
    rec.seed = cfg.seed;
    rec.estimate = pc;
    rec.stderr_ = cfg.tol / 2.0;
    rec.extra["survival_threshold"] = 0.5;
    rec.extra["horizon"] = cfg.horizon;
    rec.extra["tol"] = cfg.tol;
    return {rec};
  }
  if (command == "oracle-check") {
    if (cfg.n > 12) throw ConfigError("oracle-check is an enumeration check; use n <= 12");
    return run_oracle_check(cfg);
  }
  throw ConfigError("unknown command: " + command);
}

void print_table(const std::vector<EstimateRecord>& records, std::ostream& out) {
  out << std::left << std::setw(16) << "experiment" << std::setw(4) << "d" << std::setw(10) << "p"
      << std::setw(8) << "beta" << std::setw(8) << "n" << std::setw(16) << "estimate"
      << std::setw(14) << "stderr" << std::setw(10) << "samples" << std::setw(10) << "accepted"
      << "\n";
  for (const auto& r : records) {
    out << std::left << std::setw(16) << r.experiment << std::setw(4) << r.d << std::setw(10)
        << r.p << std::setw(8) << r.beta.str() << std::setw(8) << r.n << std::setw(16)
        << std::setprecision(8) << r.estimate << std::setw(14) << std::setprecision(4)
        << r.stderr_ << std::setw(10) << r.samples << std::setw(10) << r.accepted << "\n";
    if (r.extra.contains("summary")) out << "  " << r.extra["summary"].get<std::string>() << "\n";
  }
}

}  // namespace

RunResult run(const std::string& command, RunConfig cfg, std::ostream& out) {
  RunResult result;
  try {
    cfg.experiment = command;
    if (std::find(known_commands().begin(), known_commands().end(), command) ==
        known_commands().end())
      throw ConfigError("unknown command: " + command);
    cfg.validate();
    result.records = dispatch(command, cfg);
    if (!cfg.out.empty()) {
      ResultSink sink(cfg.out + ".csv", cfg.out + ".jsonl", cfg.to_json());
      for (const auto& rec : result.records) sink.write(rec);
    }
    print_table(result.records, out);
    return result;
  } catch (const ConfigError& ex) {
    result.exit_code = 2;
    result.error = ex.what();
  } catch (const CapExceeded& ex) {
    result.exit_code = 3;
    result.error = ex.what();
  } catch (const ZeroAcceptance& ex) {
    result.exit_code = 4;
    result.error = ex.what();
  } catch (const std::exception& ex) {
    result.exit_code = 1;
    result.error = ex.what();
  }
  nlohmann::json err;
  err["error"] = result.error;
  err["exit_code"] = result.exit_code;
  out << err.dump() << "\n";
  return result;
}

std::string summarize(const std::vector<std::string>& paths, std::ostream& table_out,
                      std::ostream& warn) {
  struct Group {
    std::vector<EstimateRecord> rows;
  };
  std::map<std::string, Group> groups;

  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open results file: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content.empty()) {
      warn << "warning: empty results file " << path << "\n";
      continue;
    }
    std::vector<std::pair<std::string, bool>> lines;  // text, complete
    std::size_t start = 0;
    while (start <= content.size()) {
      const std::size_t nl = content.find('\n', start);
      if (nl == std::string::npos) {
        if (start < content.size()) lines.emplace_back(content.substr(start), false);
        break;
      }
      lines.emplace_back(content.substr(start, nl - start), true);
      start = nl + 1;
    }
    if (lines.empty()) continue;
    if (!lines.front().second || lines.front().first != kCsvHeader)
      throw ConfigError("results file has an unknown header: " + path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const bool last = i + 1 == lines.size();
      if (!lines[i].second) {
        warn << "warning: skipping truncated final line in " << path << "\n";
        continue;
      }
      if (lines[i].first.empty()) continue;
      auto rec = parse_csv_row(lines[i].first);
      if (!rec) {
        if (last) {
          warn << "warning: skipping unparseable final line in " << path << "\n";
          continue;
        }
        throw ConfigError("corrupt row in " + path + " line " + std::to_string(i + 1));
      }
      std::ostringstream key;
      key << rec->experiment << '|' << rec->d << '|' << std::setprecision(17) << rec->p << '|'
          << rec->beta.str() << '|' << rec->n;
      groups[key.str()].rows.push_back(std::move(*rec));
    }
  }

  std::string csv = "experiment,d,p,beta,n,estimate,stderr,samples,accepted,runs\n";
  table_out << std::left << std::setw(16) << "experiment" << std::setw(4) << "d" << std::setw(10)
            << "p" << std::setw(8) << "beta" << std::setw(8) << "n" << std::setw(16) << "estimate"
            << std::setw(14) << "stderr" << std::setw(7) << "runs" << "\n";
  for (auto& [key, group] : groups) {
    const auto& rows = group.rows;
    double est = 0.0, se = 0.0;
    bool exact = false;
    for (const auto& r : rows)
      if (r.stderr_ == 0.0) exact = true;
    if (exact) {
      std::int64_t cnt = 0;
      for (const auto& r : rows)
        if (r.stderr_ == 0.0) {
          est += r.estimate;
          ++cnt;
        }
      est /= double(cnt);
      se = 0.0;
    } else {
      double wsum = 0.0, wm = 0.0;
      for (const auto& r : rows) {
        const double w = 1.0 / (r.stderr_ * r.stderr_);
        wsum += w;
        wm += w * r.estimate;
      }
      est = wm / wsum;
      se = std::sqrt(1.0 / wsum);
    }
    std::int64_t samples = 0, accepted = 0;
    for (const auto& r : rows) {
      samples += r.samples;
      accepted += r.accepted;
    }
    const auto& first = rows.front();
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%s,%lld,%.17g,%.17g,%lld,%lld,%zu\n",
                  first.experiment.c_str(), first.d, first.p, first.beta.str().c_str(),
                  (long long)first.n, est, se, (long long)samples, (long long)accepted,
                  rows.size());
    csv += buf;
    table_out << std::left << std::setw(16) << first.experiment << std::setw(4) << first.d
              << std::setw(10) << first.p << std::setw(8) << first.beta.str() << std::setw(8)
              << first.n << std::setw(16) << std::setprecision(8) << est << std::setw(14)
              << std::setprecision(4) << se << std::setw(7) << rows.size() << "\n";
  }
  return csv;
}

}  // namespace percolymer
