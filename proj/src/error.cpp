#include "sdflow/error.hpp"

namespace sdflow {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kDataError: return "DataError";
    case ErrorCode::kFullyObservable: return "RejectFullyObservable";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kPreparationMissing: return "PreparationMissing";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return 2;
    case ErrorCode::kDegenerateLabels: return 4;
    default: return 3;
  }
}

}  // namespace sdflow
