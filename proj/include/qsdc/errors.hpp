#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsdc {

// Base of every library error. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: wrong dimensions, off-grid times, empty ensembles, ...
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidDimension : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class OffGrid : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Non-finite values appeared while integrating.
class Divergence : public Error {
 public:
  Divergence(const std::string& where, std::size_t step)
      : Error(where + ": non-finite value at step " + std::to_string(step)),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct FieldError {
  std::string path;
  std::string message;
};

// All violations found while validating a configuration, not just the first.
class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<FieldError> errors)
      : InvalidArgument(format(errors)), errors_(std::move(errors)) {}
  ConfigError(std::string path, std::string message)
      : ConfigError(std::vector<FieldError>{FieldError{std::move(path), std::move(message)}}) {}

  const std::vector<FieldError>& errors() const noexcept { return errors_; }

 private:
  static std::string format(const std::vector<FieldError>& errors) {
    std::string out = "invalid configuration:";
    for (const auto& e : errors) out += "\n  " + e.path + ": " + e.message;
    return out;
  }

  std::vector<FieldError> errors_;
};

}  // namespace qsdc
