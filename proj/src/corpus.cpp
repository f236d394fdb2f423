#include "topoclinic/corpus.hpp"

#include <array>
#include <optional>
#include <sstream>

#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"
#include "topoclinic/hash.hpp"

namespace topoclinic {

using json = nlohmann::json;

namespace {

std::string describe(std::size_t index, const json& record) {
    std::string out = "record " + std::to_string(index);
    if (record.is_object()) {
        auto it = record.find("id");
        if (it != record.end() && it->is_string()) {
            out += " (id \"" + it->get<std::string>() + "\")";
        }
    }
    return out;
}

void validate(const CaseRecord& record, std::size_t index) {
    auto require = [&](std::string_view value, const char* field) {
        if (trim(value).empty()) {
            throw Error(ErrorCode::kSchema, "record " + std::to_string(index) + " (id \"" +
                                                record.id + "\"): empty field '" + field + "'");
        }
    };
    require(record.id, "id");
    require(record.presentation, "presentation");
    require(record.ground_truth, "ground_truth");
}

CaseRecord canonical_record(const json& item, std::size_t index) {
    if (!item.is_object()) {
        throw Error(ErrorCode::kSchema, describe(index, item) + ": not a JSON object");
    }
    auto field = [&](const char* name) -> std::string {
        auto it = item.find(name);
        if (it == item.end() || it->is_null()) {
            throw Error(ErrorCode::kSchema,
                        describe(index, item) + ": missing field '" + name + "'");
        }
        if (!it->is_string()) {
            throw Error(ErrorCode::kSchema,
                        describe(index, item) + ": field '" + name + "' is not a string");
        }
        return it->get<std::string>();
    };
    CaseRecord record;
    record.id = field("id");
    record.category = std::string(trim(field("category")));
    record.presentation = field("presentation");
    record.ground_truth = field("ground_truth");
    return record;
}

// Upstream layouts are matched by alias; the first alias present wins.
constexpr std::array kIdAliases = {"id", "case_id", "caseId", "Case ID", "case_no", "No", "index"};
constexpr std::array kCategoryAliases = {"category", "disease_type", "Disease Type",
                                         "disease_category", "type", "Category", "department"};
constexpr std::array kPresentationAliases = {
    "presentation", "primary_consultation", "Primary Consultation", "case",
    "case_presentation", "Case Presentation", "description", "text", "content"};
constexpr std::array kTruthAliases = {"ground_truth", "final_diagnosis", "Final Diagnosis",
                                      "diagnosis", "Diagnosis", "answer", "label"};

template <std::size_t N>
const json* find_alias(const json& item, const std::array<const char*, N>& aliases) {
    for (const char* alias : aliases) {
        auto it = item.find(alias);
        if (it != item.end() && !it->is_null()) {
            return &*it;
        }
    }
    return nullptr;
}

std::string flatten_text(const json& value) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    if (value.is_number() || value.is_boolean()) {
        return value.dump();
    }
    std::ostringstream out;
    if (value.is_object()) {
        bool first = true;
        for (const auto& [key, inner] : value.items()) {
            if (!first) out << '\n';
            first = false;
            out << key << ": " << flatten_text(inner);
        }
    } else if (value.is_array()) {
        bool first = true;
        for (const auto& inner : value) {
            if (!first) out << '\n';
            first = false;
            out << flatten_text(inner);
        }
    }
    return out.str();
}

CaseRecord upstream_record(const json& item, std::size_t index,
                           std::optional<std::string> key_id) {
    if (!item.is_object()) {
        throw Error(ErrorCode::kSchema, describe(index, item) + ": not a JSON object");
    }
    CaseRecord record;
    if (const json* id = find_alias(item, kIdAliases)) {
        record.id = flatten_text(*id);
    } else if (key_id) {
        record.id = *key_id;
    } else {
        record.id = "case-" + std::to_string(index + 1);
    }
    if (const json* category = find_alias(item, kCategoryAliases)) {
        record.category = std::string(trim(flatten_text(*category)));
    }
    const json* presentation = find_alias(item, kPresentationAliases);
    if (presentation == nullptr) {
        throw Error(ErrorCode::kSchema,
                    describe(index, item) + ": missing field 'presentation'");
    }
    record.presentation = flatten_text(*presentation);
    const json* truth = find_alias(item, kTruthAliases);
    if (truth == nullptr) {
        throw Error(ErrorCode::kSchema,
                    describe(index, item) + ": missing field 'ground_truth'");
    }
    record.ground_truth = std::string(trim(flatten_text(*truth)));
    return record;
}

json parse_document(std::string_view text, std::string_view origin, bool allow_jsonl) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        if (!allow_jsonl) {
            throw Error(ErrorCode::kParse, std::string(origin) + ": " + e.what());
        }
    }
    json lines = json::array();
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) continue;
        try {
            lines.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::kParse, std::string(origin) + ":" + std::to_string(number) +
                                               ": " + e.what());
        }
    }
    return lines;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "canonical-json") return CorpusFormat::kCanonicalJson;
    if (name == "upstream-adapter") return CorpusFormat::kUpstreamAdapter;
    throw Error(ErrorCode::kConfig, "unknown dataset format '" + std::string(name) +
                                        "' (expected canonical-json or upstream-adapter)");
}

std::string_view corpus_format_name(CorpusFormat format) {
    return format == CorpusFormat::kCanonicalJson ? "canonical-json" : "upstream-adapter";
}

CaseCorpus::CaseCorpus(std::vector<CaseRecord> cases) : cases_(std::move(cases)) {
    index_.reserve(cases_.size());
    for (std::size_t i = 0; i < cases_.size(); ++i) {
        validate(cases_[i], i);
        if (!index_.emplace(cases_[i].id, i).second) {
            throw Error(ErrorCode::kDuplicateId, "duplicate case id \"" + cases_[i].id +
                                                     "\" at record " + std::to_string(i));
        }
    }
}

const CaseRecord* CaseCorpus::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &cases_[it->second];
}

std::string CaseCorpus::content_hash() const { return sha256_hex(serialize_cases(*this)); }

CaseCorpus parse_cases(std::string_view text, CorpusFormat format, std::string_view origin) {
    const json doc = parse_document(text, origin, format == CorpusFormat::kUpstreamAdapter);
    std::vector<CaseRecord> records;
    if (format == CorpusFormat::kCanonicalJson) {
        if (!doc.is_array()) {
            throw Error(ErrorCode::kParse, std::string(origin) + ": expected a JSON array");
        }
        records.reserve(doc.size());
        for (std::size_t i = 0; i < doc.size(); ++i) {
            records.push_back(canonical_record(doc[i], i));
        }
    } else if (doc.is_array()) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
            records.push_back(upstream_record(doc[i], i, std::nullopt));
        }
    } else if (doc.is_object()) {
        // Either a wrapper {"cases": [...]} / {"data": [...]} or an id-keyed map.
        for (const char* wrapper : {"cases", "data", "records"}) {
            auto it = doc.find(wrapper);
            if (it != doc.end() && it->is_array()) {
                return parse_cases(it->dump(), format, origin);
            }
        }
        std::size_t i = 0;
        for (const auto& [key, value] : doc.items()) {
            records.push_back(upstream_record(value, i++, key));
        }
    } else {
        throw Error(ErrorCode::kParse, std::string(origin) + ": unsupported document shape");
    }
    return CaseCorpus(std::move(records));
}

CaseCorpus load_cases(const std::filesystem::path& path, CorpusFormat format) {
    return parse_cases(read_file(path), format, path.string());
}

json to_json(const CaseRecord& record) {
    return json{{"id", record.id},
                {"category", record.category},
                {"presentation", record.presentation},
                {"ground_truth", record.ground_truth}};
}

std::string serialize_cases(const CaseCorpus& corpus) {
    json out = json::array();
    for (const auto& record : corpus.cases()) {
        out.push_back(to_json(record));
    }
    return out.dump(2) + "\n";
}

std::map<std::string, std::vector<std::string>> stratify(const CaseCorpus& corpus) {
    std::map<std::string, std::vector<std::string>> buckets;
    for (const auto& record : corpus.cases()) {
        buckets[record.category].push_back(record.id);
    }
    return buckets;
}

}  // namespace topoclinic
