#include "perfloss/error.hpp"

namespace perfloss {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kOverlappingAnchors: return "OverlappingAnchors";
    case ErrorCode::kUnorderedAnchors: return "UnorderedAnchors";
    case ErrorCode::kAllRulesSilent: return "AllRulesSilent";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kUnmappedCombination: return "UnmappedCombination";
    case ErrorCode::kUnknownFlow: return "UnknownFlow";
    case ErrorCode::kUnknownSupport: return "UnknownSupport";
    case ErrorCode::kInconsistentRelations: return "InconsistentRelations";
    case ErrorCode::kMissingOutputTerm: return "MissingOutputTerm";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kPortMismatch: return "PortMismatch";
    case ErrorCode::kDanglingEdge: return "DanglingEdge";
    case ErrorCode::kUnknownTarget: return "UnknownTarget";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kArityMismatch: return "ArityMismatch";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kValidation: return "ValidationError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(message) {}

}  // namespace perfloss
