#pragma once

#include <stdexcept>
#include <string>

namespace protoscope {

// Base of every error the library raises. Subtypes map 1:1 onto the C API
// status codes and the CLI exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid parameters, specs, or preconditions.
struct ConfigError : Error {
    using Error::Error;
};

// Tensor/layer shape disagreement.
struct DimensionError : Error {
    using Error::Error;
};

// Malformed text input (CSV, spec strings); message carries line/field info.
struct ParseError : Error {
    using Error::Error;
};

// Structurally invalid model/prototype files.
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// NaN/Inf hit an op boundary.
struct NumericError : Error {
    using Error::Error;
};

// Training diverged (non-finite loss or parameters).
struct TrainingError : Error {
    using Error::Error;
};

// Dataless evaluation cannot proceed (too few usable prototypes, zero rows).
struct EvaluationError : Error {
    using Error::Error;
};

// Cosine of a vector with norm below tolerance.
struct UndefinedSimilarityError : EvaluationError {
    using EvaluationError::EvaluationError;
};

// API misuse (backward on a non-scalar, reading an absent gradient).
struct UsageError : Error {
    using Error::Error;
};

}  // namespace protoscope
