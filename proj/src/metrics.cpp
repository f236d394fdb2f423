#include "topoclinic/metrics.hpp"

#include <memory>
#include <set>

#include <spdlog/spdlog.h>

#include "topoclinic/error.hpp"

namespace topoclinic {

using json = nlohmann::json;

namespace {

void check_score(int s) {
    if (s != 0 && s != 5 && s != 10) {
        throw Error(ErrorCode::kInvalidScore, "score " + std::to_string(s) + " not in {0,5,10}");
    }
}

}  // namespace

double diagnostic_accuracy(std::span<const int> scores) {
    if (scores.empty()) {
        throw Error(ErrorCode::kEmptyInput, "diagnostic accuracy of zero cases");
    }
    // Integer sum keeps the only rounding in the final division.
    std::int64_t sum = 0;
    for (int s : scores) {
        check_score(s);
        sum += s;
    }
    return static_cast<double>(sum * 10) / static_cast<double>(scores.size());
}

double reasoning_recall(std::span<const bool> hits) {
    if (hits.empty()) {
        throw Error(ErrorCode::kEmptyInput, "reasoning recall of zero cases");
    }
    std::int64_t count = 0;
    for (bool h : hits) count += h ? 1 : 0;
    return static_cast<double>(count * 100) / static_cast<double>(hits.size());
}

double reasoning_gap(double recall_pct, double accuracy_pct) { return recall_pct - accuracy_pct; }

double ScoreHistogram::accuracy_pct() const {
    if (total() == 0) {
        throw Error(ErrorCode::kEmptyInput, "empty histogram");
    }
    return static_cast<double>((five * 5 + ten * 10) * 10) / static_cast<double>(total());
}

ScoreHistogram score_histogram(std::span<const int> scores) {
    ScoreHistogram h;
    for (int s : scores) {
        check_score(s);
        if (s == 0) ++h.zero;
        else if (s == 5) ++h.five;
        else ++h.ten;
    }
    return h;
}

std::vector<MetricsSummary> summarize(std::span<const ScoreRecord> records) {
    std::vector<MetricsSummary> out;
    for (Topology topology : kAllTopologies) {
        std::vector<int> scores;
        std::vector<RecallHit> hits;
        std::int64_t failed = 0;
        for (const auto& r : records) {
            if (r.topology != topology) continue;
            scores.push_back(r.score);
            if (r.recall_hit != RecallHit::kNotApplicable) hits.push_back(r.recall_hit);
            if (r.episode_failed) ++failed;
        }
        if (scores.empty()) continue;
        MetricsSummary s;
        s.topology = topology;
        s.n_cases = static_cast<std::int64_t>(scores.size());
        s.accuracy_pct = diagnostic_accuracy(scores);
        s.histogram = score_histogram(scores);
        s.n_failed_episodes = failed;
        if (topology != Topology::kControl && !hits.empty()) {
            // std::vector<bool> is not contiguous, so spans need a plain array.
            auto flags = std::make_unique<bool[]>(hits.size());
            for (std::size_t i = 0; i < hits.size(); ++i) flags[i] = hits[i] == RecallHit::kTrue;
            s.recall_pct = reasoning_recall(std::span<const bool>(flags.get(), hits.size()));
            s.gap = reasoning_gap(*s.recall_pct, s.accuracy_pct);
        }
        out.push_back(s);
    }
    return out;
}

std::vector<CategoryRow> category_breakdown(std::span<const ScoreRecord> records,
                                            const CaseCorpus& corpus,
                                            std::vector<std::string>* omitted) {
    struct Accumulator {
        std::int64_t sum = 0;
        std::int64_t count = 0;
    };
    std::map<std::string, std::map<Topology, Accumulator>> by_category;
    std::map<std::string, std::set<std::string>> scored_cases;
    for (const auto& r : records) {
        const CaseRecord* record = corpus.find(r.case_id);
        if (record == nullptr) {
            throw Error(ErrorCode::kUnknownCaseId, "score references unknown case \"" + r.case_id + "\"");
        }
        check_score(r.score);
        auto& acc = by_category[record->category][r.topology];
        acc.sum += r.score;
        ++acc.count;
        scored_cases[record->category].insert(r.case_id);
    }
    std::vector<CategoryRow> rows;
    for (const auto& [category, ids] : stratify(corpus)) {
        (void)ids;
        auto it = by_category.find(category);
        if (it == by_category.end()) {
            spdlog::warn("category '{}' has no scored cases; omitted from breakdown", category);
            if (omitted) omitted->push_back(category);
            continue;
        }
        CategoryRow row;
        row.category = category;
        row.case_count = static_cast<std::int64_t>(scored_cases[category].size());
        for (const auto& [topology, acc] : it->second) {
            row.mean_score[topology] = static_cast<double>(acc.sum) / static_cast<double>(acc.count);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CategoryDelta> delta_vs_control(std::span<const CategoryRow> rows) {
    std::vector<CategoryDelta> out;
    for (const auto& row : rows) {
        auto control = row.mean_score.find(Topology::kControl);
        if (control == row.mean_score.end()) {
            throw Error(ErrorCode::kMissingBaseline,
                        "category '" + row.category + "' has no control scores");
        }
        CategoryDelta d;
        d.category = row.category;
        for (const auto& [topology, mean] : row.mean_score) {
            if (topology == Topology::kControl) continue;
            d.delta[topology] = mean - control->second;
        }
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

json topology_map(const std::map<Topology, double>& values) {
    json out = json::object();
    for (const auto& [t, v] : values) out[std::string(topology_name(t))] = v;
    return out;
}

std::map<Topology, double> read_topology_map(const json& j) {
    std::map<Topology, double> out;
    for (const auto& [name, v] : j.items()) out[parse_topology(name)] = v.get<double>();
    return out;
}

}  // namespace

json to_json(const MetricsSummary& s) {
    return json{{"topology", topology_name(s.topology)},
                {"n_cases", s.n_cases},
                {"accuracy_pct", s.accuracy_pct},
                {"recall_pct", optional_number(s.recall_pct)},
                {"gap", optional_number(s.gap)},
                {"n_failed_episodes", s.n_failed_episodes},
                {"histogram", {{"0", s.histogram.zero}, {"5", s.histogram.five}, {"10", s.histogram.ten}}}};
}

MetricsSummary metrics_summary_from_json(const json& j) {
    try {
        MetricsSummary s;
        s.topology = parse_topology(j.at("topology").get<std::string>());
        s.n_cases = j.at("n_cases").get<std::int64_t>();
        s.accuracy_pct = j.at("accuracy_pct").get<double>();
        s.recall_pct = read_optional(j, "recall_pct");
        s.gap = read_optional(j, "gap");
        s.n_failed_episodes = j.at("n_failed_episodes").get<std::int64_t>();
        const json& h = j.at("histogram");
        s.histogram = {h.at("0").get<std::int64_t>(), h.at("5").get<std::int64_t>(),
                       h.at("10").get<std::int64_t>()};
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("metrics summary: ") + e.what());
    }
}

json to_json(const CategoryRow& row) {
    return json{{"category", row.category},
                {"case_count", row.case_count},
                {"mean_score", topology_map(row.mean_score)}};
}

CategoryRow category_row_from_json(const json& j) {
    try {
        return CategoryRow{j.at("category").get<std::string>(), j.at("case_count").get<std::int64_t>(),
                           read_topology_map(j.at("mean_score"))};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("category row: ") + e.what());
    }
}

json to_json(const CategoryDelta& d) {
    return json{{"category", d.category}, {"delta", topology_map(d.delta)}};
}

CategoryDelta category_delta_from_json(const json& j) {
    try {
        return CategoryDelta{j.at("category").get<std::string>(), read_topology_map(j.at("delta"))};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("category delta: ") + e.what());
    }
}

}  // namespace topoclinic
