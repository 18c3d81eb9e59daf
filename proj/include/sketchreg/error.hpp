#pragma once

#include <stdexcept>
#include <string>

namespace sketchreg {

enum class ErrorCode {
    DimensionMismatch,
    InvalidArgument,
    RankDeficient,
    NoConvergence,
    IllConditioned,
    MaxIters,
    Divergence,
    IllegalStack,
    EpsOutOfRange,
    Io,
    Format,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::MaxIters: return "MaxIters";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::IllegalStack: return "IllegalStack";
    case ErrorCode::EpsOutOfRange: return "EpsOutOfRange";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    }
    return "Unknown";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace sketchreg
