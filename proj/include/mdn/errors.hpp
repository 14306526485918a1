#pragma once

#include <stdexcept>
#include <string>

namespace mdn {

/// Invalid values in caller-supplied data (non-finite entries, bad weights).
struct InvalidInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mismatched dimensions between operands.
struct ShapeError : InvalidInputError {
    using InvalidInputError::InvalidInputError;
};

/// Triangular factor whose diagonal is too small to solve against.
struct SingularFactorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite intermediate values (exploding activations, bad gradients).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input files (datasets, checkpoints).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// API misuse, e.g. replaying an already-consumed gradient tape.
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Training aborted on a non-finite loss; records where it happened.
struct DivergenceError : NumericError {
    DivergenceError(int epoch_, int batch_, const std::string& what_)
        : NumericError(what_), epoch(epoch_), batch(batch_) {}
    int epoch;
    int batch;
};

}  // namespace mdn
