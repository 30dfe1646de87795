#include "relsim/error.hpp"

namespace relsim {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Ok: return "Ok";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
        case ErrorCode::Empty: return "Empty";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::Io: return "Io";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::Corrupt: return "Corrupt";
        case ErrorCode::UnbalancedBrace: return "UnbalancedBrace";
        case ErrorCode::EmptyPlaceholder: return "EmptyPlaceholder";
        case ErrorCode::NestedBrace: return "NestedBrace";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::InsufficientSplit: return "InsufficientSplit";
        case ErrorCode::DuplicateImageAcrossGroups: return "DuplicateImageAcrossGroups";
        case ErrorCode::UnparseableCaption: return "UnparseableCaption";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

}  // namespace relsim
