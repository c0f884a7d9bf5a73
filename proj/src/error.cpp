#include "lcgeom/error.hpp"

namespace lcgeom {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BoundaryPoint: return "BoundaryPoint";
    case ErrorCode::ZeroCell: return "ZeroCell";
    case ErrorCode::NoRealSolution: return "NoRealSolution";
    case ErrorCode::OutOfUnitBox: return "OutOfUnitBox";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::SingularPair: return "SingularPair";
    case ErrorCode::OffVariety: return "OffVariety";
    case ErrorCode::SingularDenominator: return "SingularDenominator";
    case ErrorCode::ScaleOutOfRange: return "ScaleOutOfRange";
    case ErrorCode::InvalidMixing: return "InvalidMixing";
    case ErrorCode::SingularMixing: return "SingularMixing";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
  }
  return "Unknown";
}

}  // namespace lcgeom
