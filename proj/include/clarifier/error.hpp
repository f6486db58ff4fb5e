#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clarifier {

enum class ErrorCode {
    InvalidArgument,
    DegenerateFinger,
    EmptyMask,
    NotElongated,
    ProviderError,
    Timeout,
    AuthError,
    RateLimited,
    UnknownScriptKey,
    NoEntity,
    MissingAsset,
    MalformedAsset,
    UnparseableAnalysis,
    UserAbort,
    NotFound,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code and,
/// where known, the pipeline stage that produced it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string stage = {})
        : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }

    /// Provider-side faults (transport, auth, rate limit, script misses) as
    /// opposed to faults in the caller's input.
    bool is_provider_fault() const noexcept;

private:
    ErrorCode code_;
    std::string stage_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool cond, const std::string& message) {
    if (!cond) fail(ErrorCode::InvalidArgument, message);
}

}  // namespace clarifier
