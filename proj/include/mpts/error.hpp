#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpts {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric or structural argument is outside its valid domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An integer index (label, class, position) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// The operation is not valid for the current pool or model state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Input does not satisfy a documented data contract (e.g. rows not stochastic).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A data file could not be parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The experiment configuration is malformed or violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mpts
