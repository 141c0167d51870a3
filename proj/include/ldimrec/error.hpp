#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ldimrec {

enum class ErrorCode {
    CyclicGraph,
    UnknownVertex,
    InvalidGraph,
    NumericalSingularity,
    CyclicModel,
    InvalidNoise,
    InvalidModel,
    MissingImpedance,
    CyclicTopology,
    UnstableDiscretization,
    SingularMapping,
    InvalidNetlist,
    InsufficientData,
    InvalidParams,
    SingularPsd,
    VertexMismatch,
    ParseError,
    IoError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::CyclicGraph: return "CyclicGraph";
        case ErrorCode::UnknownVertex: return "UnknownVertex";
        case ErrorCode::InvalidGraph: return "InvalidGraph";
        case ErrorCode::NumericalSingularity: return "NumericalSingularity";
        case ErrorCode::CyclicModel: return "CyclicModel";
        case ErrorCode::InvalidNoise: return "InvalidNoise";
        case ErrorCode::InvalidModel: return "InvalidModel";
        case ErrorCode::MissingImpedance: return "MissingImpedance";
        case ErrorCode::CyclicTopology: return "CyclicTopology";
        case ErrorCode::UnstableDiscretization: return "UnstableDiscretization";
        case ErrorCode::SingularMapping: return "SingularMapping";
        case ErrorCode::InvalidNetlist: return "InvalidNetlist";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::SingularPsd: return "SingularPsd";
        case ErrorCode::VertexMismatch: return "VertexMismatch";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ldimrec
