#pragma once

#include <stdexcept>
#include <string>

namespace churn {

// A caller broke a documented precondition (shapes, ranges, record counts).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configuration value is invalid or inconsistent with the data.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input files are missing, unreadable, malformed or mismatched.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss or parameters).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace churn
