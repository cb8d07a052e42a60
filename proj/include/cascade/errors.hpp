#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

// Base for all library errors. Subclasses exist so callers (and the CLI exit
// code mapping) can distinguish bad input, admissibility failures, and
// numeric failures without string matching.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- input / structural errors ---
struct IndexOutOfRange : Error { using Error::Error; };
struct SelfLoop : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NegativeRate : Error { using Error::Error; };
struct InvalidStep : Error { using Error::Error; };
struct BadKind : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct TimeOutOfRange : Error { using Error::Error; };
struct CustomPsiDimension : Error { using Error::Error; };
struct PreconditionNotMet : Error { using Error::Error; };

// Model file syntax error; carries 1-based line/column of the offending token.
// Line 0 means the error has no file location (bad flag value, unopenable
// file) and suppresses the suffix.
struct ParseError : Error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& what, int line_, int column_)
      : Error(line_ > 0 ? what + " (line " + std::to_string(line_) +
                              ", column " + std::to_string(column_) + ")"
                        : what),
        line(line_),
        column(column_) {}
};

// --- admissibility errors ---
struct GeneratorInvalid : Error { using Error::Error; };
struct ControlOutOfBounds : Error { using Error::Error; };
struct BadState : Error { using Error::Error; };
struct NonAdmissibleModel : Error { using Error::Error; };
struct BoxViolation : Error { using Error::Error; };
struct Reducible : Error { using Error::Error; };

// --- numeric errors ---
struct StepTooLarge : Error { using Error::Error; };
struct SingularSolve : Error { using Error::Error; };
struct GridTooLarge : Error { using Error::Error; };

}  // namespace cascade
