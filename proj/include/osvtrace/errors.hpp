#pragma once

#include <stdexcept>
#include <string>

namespace osvtrace {

/// Caller passed something outside a function's contract.
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input text could not be parsed (JSON, CVSS vector, CSV, ...).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A syntactically valid record violates the schema (missing id, bad timestamp).
struct RecordError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A statistical test cannot run on the given group sizes/variances.
struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No record survived parsing and filtering; maps to the dedicated exit code.
struct EmptyCorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace osvtrace
