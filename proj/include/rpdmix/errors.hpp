#ifndef RPDMIX_ERRORS_HPP
#define RPDMIX_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rpdmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double smallest_pivot)
      : Error(what), smallest_pivot_(smallest_pivot) {}
  double smallest_pivot() const noexcept { return smallest_pivot_; }

 private:
  double smallest_pivot_;
};

/// Iterative procedure failed to converge. Carries the last iterate (or the
/// per-cycle history for the joint fit) so callers can inspect it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last)
      : Error(what), last_(std::move(last)) {}
  const std::vector<double>& last_iterate() const noexcept { return last_; }

 private:
  std::vector<double> last_;
};

class DegenerateLeverageError : public Error {
 public:
  using Error::Error;
};

/// Gaussian quadratic-exponential moment does not exist (k2 <= 0).
class InfeasibleMomentError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace rpdmix

#endif  // RPDMIX_ERRORS_HPP
