#include "percolymer/records.hpp"

#include <cstdio>
#include <filesystem>

#include "percolymer/errors.hpp"

namespace percolymer {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

// Splits one CSV line honoring double-quoted fields; returns nothing on a
// dangling quote (truncated line).
std::optional<std::vector<std::string>> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::string csv_row(const EstimateRecord& rec) {
  std::string row;
  row += std::to_string(kSchemaVersion);
  row += ',' + rec.experiment;
  row += ',' + std::to_string(rec.d);
  row += ',' + fmt_double(rec.p);
  row += ',' + rec.beta.str();
  row += ',' + std::to_string(rec.n);
  row += ',' + fmt_double(rec.estimate);
  row += ',' + fmt_double(rec.stderr_);
  row += ',' + std::to_string(rec.samples);
  row += ',' + std::to_string(rec.accepted);
  row += ',' + std::to_string(rec.seed);
  row += ',' + csv_quote(rec.extra.dump());
  return row;
}

nlohmann::json jsonl_record(const EstimateRecord& rec, const nlohmann::json& resolved_config) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = rec.experiment;
  j["d"] = rec.d;
  j["p"] = rec.p;
  j["beta"] = rec.beta.str();
  j["n"] = rec.n;
  j["estimate"] = rec.estimate;
  j["stderr"] = rec.stderr_;
  j["samples"] = rec.samples;
  j["accepted"] = rec.accepted;
  j["seed"] = rec.seed;
  j["extra"] = rec.extra;
  j["config"] = resolved_config;
  j["wall_ms"] = rec.wall_ms;  // excluded from the reproducible payload
  return j;
}

std::optional<EstimateRecord> parse_csv_row(const std::string& line) {
  const auto fields = split_csv(line);
  if (!fields || fields->size() != 12) return std::nullopt;
  try {
    EstimateRecord rec;
    if (std::stoi((*fields)[0]) != kSchemaVersion)
      throw ConfigError("schema version mismatch in results file");
    rec.experiment = (*fields)[1];
    rec.d = std::stoi((*fields)[2]);
    rec.p = std::stod((*fields)[3]);
    rec.beta = ExtendedBeta::parse((*fields)[4]);
    rec.n = std::stoll((*fields)[5]);
    rec.estimate = std::stod((*fields)[6]);
    rec.stderr_ = std::stod((*fields)[7]);
    rec.samples = std::stoll((*fields)[8]);
    rec.accepted = std::stoll((*fields)[9]);
    rec.seed = std::stoull((*fields)[10]);
    rec.extra = nlohmann::json::parse((*fields)[11]);
    return rec;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

ResultSink::ResultSink(const std::string& csv_path, const std::string& jsonl_path,
                       nlohmann::json resolved_config)
    : config_(std::move(resolved_config)) {
  if (!csv_path.empty()) {
    const bool fresh =
        !std::filesystem::exists(csv_path) || std::filesystem::file_size(csv_path) == 0;
    if (!fresh) {
      std::ifstream in(csv_path);
      std::string header;
      std::getline(in, header);
      if (header != kCsvHeader)
        throw ConfigError("existing results file has a different schema: " + csv_path);
    }
    csv_.open(csv_path, std::ios::app);
    if (!csv_) throw ConfigError("cannot open output file: " + csv_path);
    if (fresh) csv_ << kCsvHeader << '\n' << std::flush;
  }
  if (!jsonl_path.empty()) {
    jsonl_.open(jsonl_path, std::ios::app);
    if (!jsonl_) throw ConfigError("cannot open output file: " + jsonl_path);
  }
}

void ResultSink::write(const EstimateRecord& rec) {
  if (csv_.is_open()) csv_ << csv_row(rec) << '\n' << std::flush;
  if (jsonl_.is_open()) jsonl_ << jsonl_record(rec, config_).dump() << '\n' << std::flush;
  ++rows_;
}

}  // namespace percolymer
