#pragma once

#include <stdexcept>
#include <string>

namespace sdflow {

enum class ErrorCode {
  kInvalidConfig,
  kFileNotFound,
  kSchemaMismatch,
  kDataError,
  kFullyObservable,
  kEmptyTrainingSet,
  kShapeMismatch,
  kLengthMismatch,
  kSingleClass,
  kPreparationMissing,
  kDegenerateLabels,
};

const char* to_string(ErrorCode code);

// Exit status the CLI reports for an error of this code:
// 2 config, 3 data, 4 degenerate training.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sdflow
