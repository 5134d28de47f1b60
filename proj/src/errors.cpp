#include "pulsealign/errors.hpp"

namespace pulsealign {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config error";
        case ErrorKind::Usage: return "usage error";
        case ErrorKind::BadMagic: return "bad magic";
        case ErrorKind::VersionMismatch: return "version mismatch";
        case ErrorKind::Truncated: return "truncated file";
        case ErrorKind::Io: return "io error";
        case ErrorKind::HeterogeneousData: return "heterogeneous data";
        case ErrorKind::DegenerateSegment: return "degenerate segment";
        case ErrorKind::DegenerateEmbedding: return "degenerate embedding";
        case ErrorKind::ShapeMismatch: return "shape mismatch";
        case ErrorKind::ConfigMismatch: return "config mismatch";
        case ErrorKind::CorruptCheckpoint: return "corrupt checkpoint";
        case ErrorKind::NumericFailure: return "numeric failure";
        case ErrorKind::DataError: return "data error";
    }
    return "error";
}

} // namespace pulsealign
