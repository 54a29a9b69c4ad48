#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace budgetface {

enum class ErrorCode {
  kZeroVector,
  kDimensionMismatch,
  kNonFiniteInput,
  kInvalidLabel,
  kInvalidConfig,
  kStaleIntermediates,
  kSingleClass,
  kInvalidClass,
  kDegenerateDistribution,
  kAllEqual,
  kTooFewFrames,
  kEmptySet,
  kMissingQualities,
  kOutOfRange,
  kInvalidRate,
  kEmptyStream,
  kShapeMismatch,
  kEmptyResult,
  kEmptyScores,
  kInsufficientData,
  kInvalidSpec,
  kParseError,
  kIoError,
  kDivergedLoss,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace budgetface
