#pragma once

#include <stdexcept>
#include <string>

namespace slrkit {

// Error taxonomy mirrored by the CLI exit codes (see tools/).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an operation needs something the model cannot provide,
// e.g. gradients through a backbone whose weights were never materialized.
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace slrkit
