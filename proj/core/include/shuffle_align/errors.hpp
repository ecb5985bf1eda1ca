#pragma once

#include <stdexcept>
#include <string>

namespace shuffle_align {

/// Bad user-supplied value (dimensions, index out of range, malformed flag).
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Placement that cannot satisfy the coverage or storage constraints.
struct InfeasiblePlacement : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Placement whose sets violate coverage or range requirements.
struct InvalidPlacement : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Constraint operator is (numerically) row-rank deficient.
struct SingularSystem : std::runtime_error {
  int rank_deficiency;
  explicit SingularSystem(int deficiency, const std::string& what)
      : std::runtime_error(what), rank_deficiency(deficiency) {}
};

/// Operation invoked on inputs that fail its stated precondition.
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Numerical breakdown inside an iterative solver.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed serialized artifact; carries a 1-based line number.
struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

}  // namespace shuffle_align
