#include "topoclinic/error.hpp"

namespace topoclinic {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kParse: return "ParseError";
        case ErrorCode::kSchema: return "SchemaError";
        case ErrorCode::kDuplicateId: return "DuplicateId";
        case ErrorCode::kTransport: return "TransportError";
        case ErrorCode::kRateLimited: return "RateLimited";
        case ErrorCode::kEmptyCompletion: return "EmptyCompletion";
        case ErrorCode::kScriptExhausted: return "ScriptExhausted";
        case ErrorCode::kNoMatch: return "NoMatch";
        case ErrorCode::kCacheCorrupt: return "CacheCorrupt";
        case ErrorCode::kMissingBinding: return "MissingBinding";
        case ErrorCode::kMissingMarker: return "MissingMarker";
        case ErrorCode::kMalformedJudgment: return "MalformedJudgment";
        case ErrorCode::kEmptyInput: return "EmptyInput";
        case ErrorCode::kInvalidScore: return "InvalidScore";
        case ErrorCode::kUnknownCaseId: return "UnknownCaseId";
        case ErrorCode::kMissingBaseline: return "MissingBaseline";
        case ErrorCode::kConfig: return "ConfigError";
        case ErrorCode::kMetadataMismatch: return "MetadataMismatch";
        case ErrorCode::kIncompleteArtifacts: return "IncompleteArtifacts";
        case ErrorCode::kDatasetMismatch: return "DatasetMismatch";
        case ErrorCode::kIo: return "IoError";
        case ErrorCode::kInvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

}  // namespace topoclinic
