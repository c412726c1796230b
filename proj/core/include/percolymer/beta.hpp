#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace percolymer {

// Inverse temperature in [0, inf]. The infinite value follows the convention
// e^{-inf} = 0, so at beta = inf the partition function counts open paths.
class ExtendedBeta {
 public:
  explicit ExtendedBeta(double value) : value_(value) {
    if (std::isnan(value) || value < 0.0) throw std::invalid_argument("beta must be >= 0 or inf");
  }

  static ExtendedBeta infinity() { return ExtendedBeta(std::numeric_limits<double>::infinity()); }

  static ExtendedBeta parse(std::string_view s);

  bool is_infinite() const { return std::isinf(value_); }
  double value() const { return value_; }

  // "inf" or shortest round-trip decimal; the serialization used by records.
  std::string str() const;

  friend bool operator==(const ExtendedBeta& a, const ExtendedBeta& b) {
    return a.value_ == b.value_;
  }

 private:
  double value_;
};

}  // namespace percolymer
