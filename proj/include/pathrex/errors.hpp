#pragma once

#include <stdexcept>

namespace pathrex {

// Shape/dimension disagreement between tensors, configs, or checkpoints.
struct DimError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Missing, unreadable, or unwritable file.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed content in an input file.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unrecognized magic bytes or version in a checkpoint.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint shorter or longer than its declared contents.
struct CorruptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values during training or a failed numeric check.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bounded retries exhausted while sampling.
struct GenError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration; the message lists every offending key.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace pathrex
