#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dalc {

enum class ErrorCode {
  kMissingFile,
  kMalformedHeader,
  kDimensionMismatch,
  kEmptyReference,
  kEmptyList,
  kLengthMismatch,
  kEmptyTrace,
  kNonPositiveProbability,
  kZeroVector,
  kEmptySample,
  kEmptyMatrix,
  kTooFewObservations,
  kDegenerateSizes,
  kEmptyTrainingSet,
  kNonFiniteFeature,
  kTooFewInstances,
  kMissingSample,
  kInsufficientDomains,
  kNoGoldLabels,
  kInvalidSpec,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception; the code is stable, the
// message names the offending record or argument.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dalc
