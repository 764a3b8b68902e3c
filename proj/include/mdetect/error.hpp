#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdetect {

enum class ErrorCode {
    // configuration
    UnknownFeatureSet,
    UnknownFeature,
    MissingColumns,
    InvalidSpec,
    ConfigError,
    ExcludedVersion,
    EmptyGrid,
    // data
    IoError,
    SchemaMismatch,
    InvalidRecord,
    UnsortedInput,
    NoBenignRows,
    TooFewUsers,
    TooFewRows,
    EmptyTrainingSet,
    EmptyDataset,
    SingleClassInput,
    KTooLarge,
    LengthMismatch,
    EmptyCandidates,
    EmptyEvaluation,
    ModelVersionMismatch,
    // reporting
    IncompleteMatrix,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. The CLI maps codes to exit
/// statuses, so every throw site inside the library uses this type.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace mdetect
