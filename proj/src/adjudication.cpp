#include "topoclinic/adjudication.hpp"

#include <algorithm>
#include <cctype>

#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"
#include "topoclinic/hash.hpp"

namespace topoclinic {

using json = nlohmann::json;

namespace {

// Decodes one UTF-8 sequence at `pos`. Returns the code point and its length,
// or {-1, 1} for a malformed byte.
std::pair<long, std::size_t> decode_utf8(std::string_view s, std::size_t pos) {
    const auto lead = static_cast<unsigned char>(s[pos]);
    std::size_t length = 0;
    long cp = 0;
    if (lead < 0x80) return {lead, 1};
    if ((lead & 0xE0) == 0xC0) {
        length = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        length = 3;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        length = 4;
        cp = lead & 0x07;
    } else {
        return {-1, 1};
    }
    if (pos + length > s.size()) return {-1, 1};
    for (std::size_t i = 1; i < length; ++i) {
        const auto c = static_cast<unsigned char>(s[pos + i]);
        if ((c & 0xC0) != 0x80) return {-1, 1};
        cp = (cp << 6) | (c & 0x3F);
    }
    return {cp, length};
}

void append_utf8(std::string& out, long cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool separator(long cp) {
    return (cp >= 0x80 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 ||
           (cp >= 0x2000 && cp <= 0x206F) || cp == 0x2212 || (cp >= 0x3000 && cp <= 0x303F) ||
           cp == 0xFEFF || (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
           (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65);
}

std::vector<std::string_view> tokens(std::string_view normalized) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < normalized.size()) {
        auto end = normalized.find(' ', pos);
        if (end == std::string_view::npos) end = normalized.size();
        if (end > pos) out.push_back(normalized.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

// `shorter` is a strictly shorter, in-order (not necessarily contiguous)
// token subsequence of `longer`.
bool strict_token_subsequence(const std::vector<std::string_view>& shorter,
                              const std::vector<std::string_view>& longer) {
    if (shorter.empty() || shorter.size() >= longer.size()) return false;
    std::size_t i = 0;
    for (const auto& token : longer) {
        if (i < shorter.size() && token == shorter[i]) ++i;
    }
    return i == shorter.size();
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

constexpr std::string_view kScoreReminder =
    "\n\nReminder: end your answer with one line in exactly this format:\nSCORE: <0, 5, or 10>";

}  // namespace

std::string normalize_text(std::string_view s) {
    std::string mapped;
    mapped.reserve(s.size());
    for (std::size_t pos = 0; pos < s.size();) {
        const auto [cp, length] = decode_utf8(s, pos);
        if (cp < 0) {
            mapped.push_back(s[pos]);
        } else if (cp < 0x80) {
            const auto c = static_cast<unsigned char>(cp);
            mapped.push_back(std::isalnum(c) ? static_cast<char>(std::tolower(c)) : ' ');
        } else if (separator(cp)) {
            mapped.push_back(' ');
        } else if (cp >= 0xC0 && cp <= 0xDE) {
            append_utf8(mapped, cp + 0x20);
        } else {
            mapped.append(s.substr(pos, length));
        }
        pos += length;
    }
    std::string out;
    out.reserve(mapped.size());
    for (char c : mapped) {
        if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
        out.push_back(c);
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string_view scorer_name(Scorer scorer) { return scorer == Scorer::kLlm ? "llm" : "exact"; }

Scorer parse_scorer(std::string_view name) {
    if (name == "llm") return Scorer::kLlm;
    if (name == "exact") return Scorer::kExact;
    throw Error(ErrorCode::kConfig, "unknown scorer '" + std::string(name) + "' (llm or exact)");
}

json to_json(const ScoreRecord& record) {
    json j{{"case_id", record.case_id},
           {"topology", topology_name(record.topology)},
           {"category", record.category},
           {"score", record.score},
           {"scorer", scorer_name(record.scorer)},
           {"episode_failed", record.episode_failed}};
    switch (record.recall_hit) {
        case RecallHit::kTrue: j["recall_hit"] = true; break;
        case RecallHit::kFalse: j["recall_hit"] = false; break;
        case RecallHit::kNotApplicable: j["recall_hit"] = nullptr; break;
    }
    if (record.judge_rationale) j["judge_rationale"] = *record.judge_rationale;
    return j;
}

ScoreRecord score_record_from_json(const json& j) {
    try {
        ScoreRecord record;
        record.case_id = j.at("case_id").get<std::string>();
        record.topology = parse_topology(j.at("topology").get<std::string>());
        record.category = j.value("category", std::string());
        record.score = j.at("score").get<int>();
        if (record.score != 0 && record.score != 5 && record.score != 10) {
            throw Error(ErrorCode::kInvalidScore, "score " + std::to_string(record.score));
        }
        record.scorer = parse_scorer(j.at("scorer").get<std::string>());
        record.episode_failed = j.value("episode_failed", false);
        const json& hit = j.at("recall_hit");
        record.recall_hit = hit.is_null() ? RecallHit::kNotApplicable
                            : hit.get<bool>() ? RecallHit::kTrue
                                              : RecallHit::kFalse;
        if (auto it = j.find("judge_rationale"); it != j.end() && it->is_string()) {
            record.judge_rationale = it->get<std::string>();
        }
        return record;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("score record: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

SynonymTable::Pair SynonymTable::unordered(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return {std::move(a), std::move(b)};
}

SynonymTable::SynonymTable(const std::vector<std::pair<std::string, std::string>>& synonym_pairs,
                           const std::vector<std::pair<std::string, std::string>>& family_edges) {
    for (const auto& [a, b] : synonym_pairs) {
        synonym_pairs_.insert(unordered(normalize_text(a), normalize_text(b)));
    }
    for (const auto& [parent, child] : family_edges) {
        auto pair = unordered(normalize_text(parent), normalize_text(child));
        if (synonym_pairs_.contains(pair)) {
            throw Error(ErrorCode::kSchema, "pair (" + parent + ", " + child +
                                                ") is listed as both synonym and family");
        }
        family_edges_.insert(std::move(pair));
    }
}

SynonymTable SynonymTable::from_json(const json& doc) {
    auto pairs = [&](const char* key) {
        std::vector<std::pair<std::string, std::string>> out;
        auto it = doc.find(key);
        if (it == doc.end()) return out;
        if (!it->is_array()) {
            throw Error(ErrorCode::kSchema, std::string("synonym table '") + key + "' must be an array");
        }
        for (const auto& item : *it) {
            if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string()) {
                throw Error(ErrorCode::kSchema, std::string("synonym table '") + key +
                                                    "' entries must be [string, string]");
            }
            out.emplace_back(item[0].get<std::string>(), item[1].get<std::string>());
        }
        return out;
    };
    if (!doc.is_object()) {
        throw Error(ErrorCode::kSchema, "synonym table must be a JSON object");
    }
    return SynonymTable(pairs("synonyms"), pairs("families"));
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
    }
}

bool SynonymTable::synonyms(std::string_view a, std::string_view b) const {
    return synonym_pairs_.contains(unordered(normalize_text(a), normalize_text(b)));
}

bool SynonymTable::family(std::string_view a, std::string_view b) const {
    return family_edges_.contains(unordered(normalize_text(a), normalize_text(b)));
}

std::string SynonymTable::hash() const {
    return sha256_hex(json{{"synonyms", synonym_pairs_}, {"families", family_edges_}}.dump());
}

// ---------------------------------------------------------------------------

bool reasoning_recall_hit(const std::vector<AgentTurn>& transcript, std::string_view truth) {
    const std::string needle = normalize_text(truth);
    if (needle.empty()) return false;
    std::string haystack;
    for (const auto& turn : transcript) {
        haystack += turn.response;
        haystack += ' ';
    }
    return normalize_text(haystack).find(needle) != std::string::npos;
}

int parse_judge_output(std::string_view text) {
    const std::string folded = ascii_lower(text);
    const auto at = folded.rfind("score:");
    if (at == std::string::npos) {
        throw Error(ErrorCode::kMalformedJudgment, "no SCORE: marker in judge output");
    }
    std::size_t pos = at + 6;
    while (pos < folded.size() && (folded[pos] == ' ' || folded[pos] == '\t' || folded[pos] == '*')) {
        ++pos;
    }
    const std::size_t digits_start = pos;
    while (pos < folded.size() && std::isdigit(static_cast<unsigned char>(folded[pos]))) ++pos;
    if (pos == digits_start || pos - digits_start > 3) {
        throw Error(ErrorCode::kMalformedJudgment, "SCORE: is not followed by a small integer");
    }
    if (pos + 1 < folded.size() && (folded[pos] == '.' || folded[pos] == ',') &&
        std::isdigit(static_cast<unsigned char>(folded[pos + 1]))) {
        throw Error(ErrorCode::kMalformedJudgment, "SCORE: value is not an integer");
    }
    const int value = std::stoi(folded.substr(digits_start, pos - digits_start));
    if (value != 0 && value != 5 && value != 10) {
        throw Error(ErrorCode::kMalformedJudgment,
                    "SCORE: " + std::to_string(value) + " is not one of 0, 5, 10");
    }
    return value;
}

int judge_exact(std::string_view prediction, std::string_view truth, const SynonymTable& table) {
    const std::string p = normalize_text(prediction);
    const std::string t = normalize_text(truth);
    if (p.empty() || t.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "judge_exact needs non-empty inputs");
    }
    if (p == t || table.synonyms(p, t)) return 10;
    if (table.family(p, t)) return 5;
    const auto pt = tokens(p);
    const auto tt = tokens(t);
    if (strict_token_subsequence(pt, tt) || strict_token_subsequence(tt, pt)) return 5;
    return 0;
}

LlmJudge::LlmJudge(std::shared_ptr<Provider> provider, std::string model,
                   const TemplateSet& templates, double temperature)
    : provider_(std::move(provider)),
      model_(std::move(model)),
      rubric_(templates.at("adjudicator")),
      temperature_(temperature) {}

Judgment LlmJudge::judge(std::string_view prediction, std::string_view truth) const {
    if (trim(prediction).empty() || trim(truth).empty()) {
        throw Error(ErrorCode::kInvalidArgument, "judge needs non-empty prediction and truth");
    }
    const Bindings bindings{{"prediction", std::string(prediction)}, {"truth", std::string(truth)}};
    ChatRequest request;
    request.model = model_;
    request.temperature = temperature_;
    request.messages.push_back({ChatRole::kSystem, render_prompt(rubric_.system, bindings)});
    request.messages.push_back({ChatRole::kUser, render_prompt(rubric_.user, bindings)});
    for (int attempt = 0;; ++attempt) {
        const ChatResponse response = provider_->complete(request);
        try {
            return Judgment{parse_judge_output(response.content),
                            std::string(trim(response.content))};
        } catch (const Error&) {
            if (attempt >= 1) throw;
            request.messages.back().content += kScoreReminder;
        }
    }
}

}  // namespace topoclinic
