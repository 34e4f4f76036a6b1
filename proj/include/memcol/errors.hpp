#pragma once

#include <stdexcept>
#include <string>

namespace memcol {

// Base for all library errors so callers can catch one type at the CLI edge.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input records (CSV rows, JSONL lines, checkpoint bytes).
struct ParseError : Error {
    using Error::Error;
};

// A color string outside the fixed 11-word vocabulary.
struct VocabularyError : Error {
    using Error::Error;
};

// Invalid configuration (thresholds, ratios, dimensions).
struct ConfigError : Error {
    using Error::Error;
};

// Annotation matrix does not cover the dataset it is scored against.
struct CoverageError : Error {
    using Error::Error;
};

// Template substitution left an unresolved placeholder or was malformed.
struct RenderError : Error {
    using Error::Error;
};

// Adapter wire-protocol violations (missing/duplicate ids, bad lines).
struct ProtocolError : Error {
    using Error::Error;
};

// Versioned file with wrong/unknown format tag.
struct FormatError : Error {
    using Error::Error;
};

// Toy-model training diverged or hit non-finite values.
struct TrainError : Error {
    using Error::Error;
};

// Tensor/dimension mismatch in the toy model.
struct ShapeError : Error {
    using Error::Error;
};

// Text not representable in the toy vocabulary.
struct EncodingError : Error {
    using Error::Error;
};

// Non-finite or otherwise unusable prediction scores.
struct ScoringError : Error {
    using Error::Error;
};

}  // namespace memcol
