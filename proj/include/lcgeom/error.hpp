#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lcgeom {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  BoundaryPoint,
  ZeroCell,
  NoRealSolution,
  OutOfUnitBox,
  ConstraintViolation,
  SingularPair,
  OffVariety,
  SingularDenominator,
  ScaleOutOfRange,
  InvalidMixing,
  SingularMixing,
  DegenerateInput,
};

std::string_view to_string(ErrorCode code);

// All analysis failures carry a code so callers (and the CLI) can report
// them verbatim without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lcgeom
