#include "budgetface/error.hpp"

namespace budgetface {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kInvalidLabel: return "InvalidLabel";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kStaleIntermediates: return "StaleIntermediates";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kInvalidClass: return "InvalidClass";
    case ErrorCode::kDegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::kAllEqual: return "AllEqual";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kMissingQualities: return "MissingQualities";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInvalidRate: return "InvalidRate";
    case ErrorCode::kEmptyStream: return "EmptyStream";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kEmptyScores: return "EmptyScores";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace budgetface
