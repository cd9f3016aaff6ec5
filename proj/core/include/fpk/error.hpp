#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fpk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector length or truncation index outside the admissible range.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A zero weight met a nonzero coordinate in the dual norm.
class SingularWeightError : public Error {
 public:
  using Error::Error;
};

/// Coefficient evaluation produced non-finite output or was called outside [0, T].
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class DomainTooSmallError : public Error {
 public:
  using Error::Error;
};

class StepSizeError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A simulated state left the guard ball or became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t path, std::size_t step, const std::string& what)
      : Error(what), path_(path), step_(step) {}

  std::size_t path() const noexcept { return path_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t path_;
  std::size_t step_;
};

}  // namespace fpk
