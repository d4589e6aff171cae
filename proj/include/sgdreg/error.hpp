#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sgdreg {

enum class ErrorKind {
  Validation,  // bad input, inadmissible parameters, out-of-domain arguments
  Numerical,   // divergence, non-finite values, failed inner iterations
  Io,          // unreadable/unwritable files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

/// Raised when an iteration produces unusable numbers. `step()` is the
/// 1-based iteration counter at which the failure was detected (0 if not tied
/// to an iteration).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::size_t step = 0)
      : Error(ErrorKind::Numerical, what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// Warning sink. Defaults to stderr; tests and the C API may redirect it.
using WarningSink = void (*)(const std::string& message);
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace sgdreg
