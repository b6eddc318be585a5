#include "multicam/common/error.hpp"

namespace multicam {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidModel: return "InvalidModel";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNonFiniteResidual: return "NonFiniteResidual";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kCategoryMismatch: return "CategoryMismatch";
    case ErrorCode::kNoAnchoredCamera: return "NoAnchoredCamera";
    case ErrorCode::kUnanchoredCamera: return "UnanchoredCamera";
    case ErrorCode::kSingularHessian: return "SingularHessian";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::kNoKeyframes: return "NoKeyframes";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace multicam
