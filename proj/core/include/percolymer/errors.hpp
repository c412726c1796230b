#pragma once

#include <stdexcept>
#include <string>

namespace percolymer {

// Invalid run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A configured resource cap was exceeded (CLI exit code 3). Raised instead of
// silently truncating a computation.
struct CapExceeded : std::runtime_error {
  explicit CapExceeded(const std::string& what) : std::runtime_error(what) {}
};

// Rejection sampling accepted nothing (CLI exit code 4); usually p too small
// or n too large for the conditioning event.
struct ZeroAcceptance : std::runtime_error {
  explicit ZeroAcceptance(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace percolymer
