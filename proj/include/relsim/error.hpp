#pragma once

#include <stdexcept>
#include <string>

namespace relsim {

// Values mirror relsim_status in relsim.h; keep the two in sync.
enum class ErrorCode : int {
    Ok = 0,
    InvalidArgument = 1,
    DimMismatch = 2,
    ZeroVector = 3,
    NonPositiveTemperature = 4,
    Empty = 5,
    DuplicateId = 6,
    UnknownId = 7,
    Io = 8,
    BadMagic = 9,
    UnsupportedVersion = 10,
    Corrupt = 11,
    UnbalancedBrace = 12,
    EmptyPlaceholder = 13,
    NestedBrace = 14,
    SingleClass = 15,
    InsufficientSplit = 16,
    DuplicateImageAcrossGroups = 17,
    UnparseableCaption = 18,
    Transport = 19,
    ParseFailure = 20,
    OutOfRange = 21,
    Internal = 22,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace relsim
