#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace topoclinic {

/// One primary-consultation case. The presentation narrative is opaque and is
/// handed to agents whole.
struct CaseRecord {
    std::string id;
    std::string category;
    std::string presentation;
    std::string ground_truth;

    bool operator==(const CaseRecord&) const = default;
};

enum class CorpusFormat { kCanonicalJson, kUpstreamAdapter };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view corpus_format_name(CorpusFormat format);

/// Immutable, validated case collection. Input order is preserved.
class CaseCorpus {
public:
    CaseCorpus() = default;
    /// Validates every record; throws kSchema or kDuplicateId.
    explicit CaseCorpus(std::vector<CaseRecord> cases);

    const std::vector<CaseRecord>& cases() const noexcept { return cases_; }
    std::size_t size() const noexcept { return cases_.size(); }
    bool empty() const noexcept { return cases_.empty(); }

    /// nullptr when absent.
    const CaseRecord* find(std::string_view id) const;

    /// SHA-256 of the canonical serialization; binds runs to data.
    std::string content_hash() const;

private:
    std::vector<CaseRecord> cases_;
    std::unordered_map<std::string, std::size_t> index_;
};

CaseCorpus load_cases(const std::filesystem::path& path, CorpusFormat format);

/// Parses in-memory text; `origin` only feeds error messages.
CaseCorpus parse_cases(std::string_view text, CorpusFormat format,
                       std::string_view origin = "<memory>");

/// Canonical JSON array form accepted by parse_cases(kCanonicalJson).
std::string serialize_cases(const CaseCorpus& corpus);

/// Category -> case ids. Buckets are lexicographically ordered (std::map) and
/// preserve input order inside each bucket.
std::map<std::string, std::vector<std::string>> stratify(const CaseCorpus& corpus);

nlohmann::json to_json(const CaseRecord& record);

}  // namespace topoclinic
