#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multicam {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidModel,
  kEmptyInput,
  kDegenerateConfiguration,
  kNonFiniteResidual,
  kNoConsensus,
  kCategoryMismatch,
  kNoAnchoredCamera,
  kUnanchoredCamera,
  kSingularHessian,
  kInvalidConfig,
  kParseError,
  kSchemaVersionMismatch,
  kNoKeyframes,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can attribute it to a stage without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace multicam
