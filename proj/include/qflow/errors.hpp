#pragma once

#include <stdexcept>
#include <string>

namespace qflow {

// Error categories map onto the CLI exit-code contract:
// config errors -> 1, numeric failures -> 2, I/O errors -> 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qflow
