#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "percolymer/estimate.hpp"

namespace percolymer {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kCsvHeader =
    "schema_version,experiment,d,p,beta,n,estimate,stderr,samples,accepted,seed,extra";

// Deterministic CSV data row; contains no timestamps, so identical runs append
// byte-identical rows.
std::string csv_row(const EstimateRecord& rec);

// JSON-lines object; wall_ms is the only field outside the reproducible
// payload and `config` echoes the fully resolved run configuration.
nlohmann::json jsonl_record(const EstimateRecord& rec, const nlohmann::json& resolved_config);

// Parses one CSV data row (quoted fields allowed). Returns nothing for a
// truncated/malformed row so the reader can decide whether to warn or fail.
std::optional<EstimateRecord> parse_csv_row(const std::string& line);

// Appends records to a CSV and a JSON-lines file, one flushed line per
// record. The header is written once; appending to a file with a different
// header fails.
class ResultSink {
 public:
  // Either path may be empty to skip that output.
  ResultSink(const std::string& csv_path, const std::string& jsonl_path,
             nlohmann::json resolved_config);

  void write(const EstimateRecord& rec);
  std::int64_t rows_written() const { return rows_; }

 private:
  std::ofstream csv_;
  std::ofstream jsonl_;
  nlohmann::json config_;
  std::int64_t rows_ = 0;
};

}  // namespace percolymer
