#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kadr {

enum class ErrorCode {
    invalid_argument,
    invalid_config,
    transport,
    malformed_response,
    no_script,
    empty_completion,
    parse,
    stage_failure,
    backend_unavailable,
    io,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::invalid_config: return "invalid_config";
        case ErrorCode::transport: return "transport";
        case ErrorCode::malformed_response: return "malformed_response";
        case ErrorCode::no_script: return "no_script";
        case ErrorCode::empty_completion: return "empty_completion";
        case ErrorCode::parse: return "parse";
        case ErrorCode::stage_failure: return "stage_failure";
        case ErrorCode::backend_unavailable: return "backend_unavailable";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

/// Base exception for everything thrown by the library. Carries a coarse
/// error code so callers (CLI, HTTP server) can map failures without
/// string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, std::string_view message) {
    if (!condition) {
        throw Error(ErrorCode::invalid_argument, std::string(message));
    }
}

}  // namespace kadr
