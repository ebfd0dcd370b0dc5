#pragma once

#include <stdexcept>
#include <string>

namespace metastim {

/// Raised for bad input data or violated operation preconditions.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed configuration (files, CLI options, enum names).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace metastim
