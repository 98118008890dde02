#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace perfloss {

enum class ErrorCode {
  kInvalidArgument,
  kOverlappingAnchors,
  kUnorderedAnchors,
  kAllRulesSilent,
  kEmptyDataset,
  kNonFiniteGradient,
  kUnmappedCombination,
  kUnknownFlow,
  kUnknownSupport,
  kInconsistentRelations,
  kMissingOutputTerm,
  kCycleDetected,
  kPortMismatch,
  kDanglingEdge,
  kUnknownTarget,
  kParseError,
  kArityMismatch,
  kIo,
  kValidation,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. what() reads "<CodeName>: <message>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace perfloss
