#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topoclinic {

enum class ErrorCode {
    kParse = 1,
    kSchema,
    kDuplicateId,
    kTransport,
    kRateLimited,
    kEmptyCompletion,
    kScriptExhausted,
    kNoMatch,
    kCacheCorrupt,
    kMissingBinding,
    kMissingMarker,
    kMalformedJudgment,
    kEmptyInput,
    kInvalidScore,
    kUnknownCaseId,
    kMissingBaseline,
    kConfig,
    kMetadataMismatch,
    kIncompleteArtifacts,
    kDatasetMismatch,
    kIo,
    kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

/// Single exception type for the library. The code is what callers branch on;
/// the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// Transport and rate-limit failures are the only ones worth retrying.
    bool transient() const noexcept {
        return code_ == ErrorCode::kTransport || code_ == ErrorCode::kRateLimited;
    }

private:
    ErrorCode code_;
};

}  // namespace topoclinic
