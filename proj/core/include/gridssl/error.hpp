#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridssl {

// Bad config file, bad CLI usage, incompatible shapes between files and config.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss, degenerate states, division by zero, singular inputs.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Missing/corrupt files, unwritable output paths.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Norm-ReLU hit an all-nonpositive pre-activation during a plain unroll.
class DegenerateStateError : public NumericError {
 public:
  DegenerateStateError(const std::string& what, std::size_t step)
      : NumericError(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace gridssl
