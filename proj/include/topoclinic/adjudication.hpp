#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "topoclinic/provider.hpp"
#include "topoclinic/templates.hpp"
#include "topoclinic/topology.hpp"

namespace topoclinic {

/// Case-folds, maps punctuation (ASCII and common Unicode dashes, quotes and
/// spaces) to single spaces, collapses whitespace and trims. Idempotent.
std::string normalize_text(std::string_view s);

enum class Scorer { kLlm, kExact };
std::string_view scorer_name(Scorer scorer);
Scorer parse_scorer(std::string_view name);

enum class RecallHit { kFalse, kTrue, kNotApplicable };

struct ScoreRecord {
    std::string case_id;
    Topology topology = Topology::kControl;
    std::string category;
    int score = 0;
    Scorer scorer = Scorer::kExact;
    RecallHit recall_hit = RecallHit::kNotApplicable;
    std::optional<std::string> judge_rationale;
    bool episode_failed = false;

    bool operator==(const ScoreRecord&) const = default;
};

nlohmann::json to_json(const ScoreRecord& record);
ScoreRecord score_record_from_json(const nlohmann::json& j);

/// Synonym pairs score as exact matches; family edges (parent, child) as
/// close calls. Names are stored normalized.
class SynonymTable {
public:
    SynonymTable() = default;
    SynonymTable(const std::vector<std::pair<std::string, std::string>>& synonym_pairs,
                 const std::vector<std::pair<std::string, std::string>>& family_edges);

    /// {"synonyms": [[a, b], ...], "families": [[parent, child], ...]}
    static SynonymTable load(const std::filesystem::path& path);
    static SynonymTable from_json(const nlohmann::json& doc);

    bool synonyms(std::string_view a, std::string_view b) const;
    /// Either direction.
    bool family(std::string_view a, std::string_view b) const;

    std::string hash() const;

private:
    using Pair = std::pair<std::string, std::string>;
    static Pair unordered(std::string a, std::string b);

    std::set<Pair> synonym_pairs_;
    std::set<Pair> family_edges_;
};

/// True iff the normalized truth occurs in the normalized concatenation of
/// every turn response.
bool reasoning_recall_hit(const std::vector<AgentTurn>& transcript, std::string_view truth);

/// Last integer after a case-insensitive `SCORE:` marker; must be 0, 5 or 10.
/// Throws kMalformedJudgment otherwise.
int parse_judge_output(std::string_view text);

/// Deterministic rubric: 10 exact/synonym, 5 family edge or generic-vs-subtype
/// token subsequence, else 0.
int judge_exact(std::string_view prediction, std::string_view truth, const SynonymTable& table);

struct Judgment {
    int score = 0;
    std::string rationale;
};

/// LLM-as-judge with the rubric template as system instruction. The judge
/// sees only the prediction and the truth. One retry on a malformed reply.
class LlmJudge {
public:
    LlmJudge(std::shared_ptr<Provider> provider, std::string model, const TemplateSet& templates,
             double temperature = 0.0);

    Judgment judge(std::string_view prediction, std::string_view truth) const;

private:
    std::shared_ptr<Provider> provider_;
    std::string model_;
    PromptTemplate rubric_;
    double temperature_;
};

}  // namespace topoclinic
