#pragma once

#include <stdexcept>
#include <string>

namespace pedflow {

/// Linear solve failed or the system is numerically unusable.
/// Carries the 1-norm condition estimate observed at the failing solve.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_(condition_estimate) {}
  double condition_estimate() const { return condition_; }

 private:
  double condition_;
};

/// Requested placement does not fit the available slots.
class CapacityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed textual input (maps, configs). Carries a line/column position
/// when one is known (1-based; 0 = unknown).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, int line = 0, int column = 0)
      : std::runtime_error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace pedflow
