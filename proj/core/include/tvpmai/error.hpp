#ifndef TVPMAI_ERROR_HPP
#define TVPMAI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace tvpmai {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input: malformed options, out-of-range parameters, impossible
// requests. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Malformed input file (CSV structure, non-numeric cells, bad dates).
class ParseError : public ValidationError {
 public:
  explicit ParseError(const std::string& what) : ValidationError(what) {}
};

// Numerical failure at run time (singular innovation covariance, filter
// divergence). Carries the time index where the failure occurred when one
// is meaningful; time_index is -1 otherwise. CLI exit code 1.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, int time_index = -1)
      : Error(what), time_index_(time_index) {}
  int time_index() const { return time_index_; }

 private:
  int time_index_;
};

}  // namespace tvpmai

#endif  // TVPMAI_ERROR_HPP
