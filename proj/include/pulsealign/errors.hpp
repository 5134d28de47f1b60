#pragma once

#include <stdexcept>
#include <string>

namespace pulsealign {

// Every failure surfaced by the library carries one of these kinds so callers
// (and tests) can dispatch on the cause instead of parsing message strings.
enum class ErrorKind {
    Config,             // invalid configuration value or combination
    Usage,              // caller violated an operation precondition
    BadMagic,           // file does not start with the expected magic bytes
    VersionMismatch,    // file format version not supported
    Truncated,          // file shorter than its header promises
    Io,                 // underlying read/write failure
    HeterogeneousData,  // segments with mismatched modality/rate/length
    DegenerateSegment,  // zero-variance segment reached normalization
    DegenerateEmbedding,// zero-norm row reached l2 normalization
    ShapeMismatch,      // tensor/matrix dimensions incompatible
    ConfigMismatch,     // checkpoint config differs from the requested one
    CorruptCheckpoint,  // checkpoint payload unreadable
    NumericFailure,     // NaN loss, singular system, undefined metric
    DataError,          // bad input data (alignment, labels, CSV)
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

} // namespace pulsealign
