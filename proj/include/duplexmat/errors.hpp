#pragma once

#include <stdexcept>
#include <string>

namespace duplexmat {

// Each error class maps onto one CLI exit code (see tools/duplexmat.cpp).

/// Invalid parameters, configuration keys or precondition violations.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File system and codec failures. The message carries the offending path.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, degenerate inputs and failed validation checks.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Dimensions of two rasters disagree.
class DimensionError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

}  // namespace duplexmat
