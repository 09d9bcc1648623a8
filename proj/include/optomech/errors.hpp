#pragma once

#include <stdexcept>
#include <string>

namespace optomech {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, schedules or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data (traces, spectra, files).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Spectrum or trace carries the wrong unit tag for the requested operation.
class UnitError : public Error {
 public:
  using Error::Error;
};

/// A right-hand side was asked to evaluate a non-finite state.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// The integrated state left the divergence guard.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Least-squares or ring-down fit failed; carries a textual best-so-far state.
class FitError : public Error {
 public:
  explicit FitError(const std::string& what, std::string best_so_far = {})
      : Error(what), best_so_far_(std::move(best_so_far)) {}
  const std::string& best_so_far() const noexcept { return best_so_far_; }

 private:
  std::string best_so_far_;
};

}  // namespace optomech
