#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topoclinic/adjudication.hpp"
#include "topoclinic/corpus.hpp"
#include "topoclinic/topology.hpp"

namespace topoclinic {

/// Mean rubric score scaled to percent: (sum S_i / N) * 10.
/// Throws kEmptyInput or kInvalidScore.
double diagnostic_accuracy(std::span<const int> scores);

/// Share of true hits, in percent. Throws kEmptyInput.
double reasoning_recall(std::span<const bool> hits);

/// recall - accuracy; may be negative.
double reasoning_gap(double recall_pct, double accuracy_pct);

/// Counts for the bins {0, 5, 10}.
struct ScoreHistogram {
    std::int64_t zero = 0;
    std::int64_t five = 0;
    std::int64_t ten = 0;

    std::int64_t total() const { return zero + five + ten; }
    /// Accuracy recomputed from counts alone.
    double accuracy_pct() const;
    bool operator==(const ScoreHistogram&) const = default;
};

ScoreHistogram score_histogram(std::span<const int> scores);

struct MetricsSummary {
    Topology topology = Topology::kControl;
    std::int64_t n_cases = 0;
    double accuracy_pct = 0.0;
    std::optional<double> recall_pct;
    std::optional<double> gap;
    std::int64_t n_failed_episodes = 0;
    ScoreHistogram histogram;
};

/// Summary per topology present in `records`, in canonical topology order.
/// Control never gets recall/gap.
std::vector<MetricsSummary> summarize(std::span<const ScoreRecord> records);

struct CategoryRow {
    std::string category;
    std::int64_t case_count = 0;
    /// Mean raw score on the 0-10 scale for each topology with records.
    std::map<Topology, double> mean_score;
};

/// Rows sorted by category. Corpus categories without any record are
/// omitted and reported through `omitted` when given.
/// Throws kUnknownCaseId for records that reference unknown cases.
std::vector<CategoryRow> category_breakdown(std::span<const ScoreRecord> records,
                                            const CaseCorpus& corpus,
                                            std::vector<std::string>* omitted = nullptr);

struct CategoryDelta {
    std::string category;
    /// topology mean - control mean, for every non-control topology in the row.
    std::map<Topology, double> delta;
};

/// Throws kMissingBaseline when a row has other topologies but no control.
std::vector<CategoryDelta> delta_vs_control(std::span<const CategoryRow> rows);

nlohmann::json to_json(const MetricsSummary& summary);
MetricsSummary metrics_summary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CategoryRow& row);
CategoryRow category_row_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CategoryDelta& delta);
CategoryDelta category_delta_from_json(const nlohmann::json& j);

}  // namespace topoclinic
