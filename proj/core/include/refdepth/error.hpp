#pragma once

#include <stdexcept>
#include <string>

namespace refdepth {

/// Bad configuration value or unknown key. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable/unwritable file or malformed on-disk data. Exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value detected during training/optimization. Exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace refdepth
