#include <fmt/format.h>

#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"
#include "topoclinic/harness.hpp"

namespace topoclinic {

using json = nlohmann::json;
namespace fs = std::filesystem;

ReportFormat parse_report_format(std::string_view name) {
    if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
    if (name == "csv") return ReportFormat::kCsv;
    throw Error(ErrorCode::kConfig, "unknown report format '" + std::string(name) + "' (markdown or csv)");
}

json to_json(const RunSummary& summary) {
    json topologies = json::array();
    for (const auto& s : summary.topologies) topologies.push_back(to_json(s));
    json categories = json::array();
    for (const auto& c : summary.categories) categories.push_back(to_json(c));
    json deltas = nullptr;
    if (summary.delta_vs_control) {
        deltas = json::array();
        for (const auto& d : *summary.delta_vs_control) deltas.push_back(to_json(d));
    }
    return json{{"dataset_sha256", summary.dataset_sha256},
                {"scorer", scorer_name(summary.scorer)},
                {"topologies", std::move(topologies)},
                {"categories", std::move(categories)},
                {"omitted_categories", summary.omitted_categories},
                {"delta_vs_control", std::move(deltas)}};
}

RunSummary run_summary_from_json(const json& j) {
    try {
        RunSummary summary;
        summary.dataset_sha256 = j.at("dataset_sha256").get<std::string>();
        summary.scorer = parse_scorer(j.at("scorer").get<std::string>());
        for (const auto& s : j.at("topologies")) summary.topologies.push_back(metrics_summary_from_json(s));
        for (const auto& c : j.at("categories")) summary.categories.push_back(category_row_from_json(c));
        summary.omitted_categories = j.at("omitted_categories").get<std::vector<std::string>>();
        if (const auto& d = j.at("delta_vs_control"); !d.is_null()) {
            summary.delta_vs_control.emplace();
            for (const auto& row : d) summary.delta_vs_control->push_back(category_delta_from_json(row));
        }
        return summary;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("summary: ") + e.what());
    }
}

RunSummary load_run_summary(const fs::path& out_dir) {
    const auto meta_path = out_dir / RunFiles::kMetadata;
    const auto summary_path = out_dir / RunFiles::kSummary;
    if (!fs::exists(meta_path) || !fs::exists(summary_path)) {
        throw Error(ErrorCode::kIncompleteArtifacts, out_dir.string() + " has no scored run");
    }
    const json metadata = json::parse(read_file(meta_path), nullptr, false);
    if (metadata.is_discarded() || metadata.value("status", "") != "scored") {
        throw Error(ErrorCode::kIncompleteArtifacts,
                    out_dir.string() + " is not complete (resume it first)");
    }
    const json doc = json::parse(read_file(summary_path), nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::kParse, summary_path.string() + " is not valid JSON");
    }
    return run_summary_from_json(doc);
}

// ---------------------------------------------------------------------------

namespace {

std::string_view display_name(Topology t) {
    switch (t) {
        case Topology::kControl: return "Control";
        case Topology::kHierarchical: return "Hierarchical";
        case Topology::kAdversarial: return "Adversarial";
        case Topology::kCollaborative: return "Collaborative";
    }
    return "";
}

// Rounding happens only here, at emission.
std::string fixed(double v, int decimals) {
    std::string s = fmt::format("{:.{}f}", v, decimals);
    if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string signed_fixed(double v, int decimals) {
    std::string s = fixed(v, decimals);
    if (!s.starts_with('-') && s.find_first_not_of("0.") != std::string::npos) s.insert(0, "+");
    return s;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_cell(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c;
    }
    return out;
}

std::vector<Topology> grid_columns(const std::vector<CategoryRow>& rows) {
    std::vector<Topology> cols;
    for (Topology t : kAllTopologies) {
        for (const auto& row : rows) {
            if (row.mean_score.contains(t)) {
                cols.push_back(t);
                break;
            }
        }
    }
    return cols;
}

}  // namespace

std::string render_summary_table(const std::vector<MetricsSummary>& rows, ReportFormat format) {
    std::string out;
    if (format == ReportFormat::kMarkdown) {
        out += "| Topology | Diagnostic Accuracy (%) | Reasoning Recall (%) | Reasoning Gap (Δ) |\n";
        out += "|---|---|---|---|\n";
        for (const auto& r : rows) {
            std::string label(display_name(r.topology));
            if (r.topology == Topology::kControl) label += " (Baseline)";
            out += fmt::format("| {} | {}% | {} | {} |\n", label, fixed(r.accuracy_pct, 1),
                               r.recall_pct ? fixed(*r.recall_pct, 1) + "%" : "N/A",
                               r.gap ? fixed(*r.gap, 1) : "N/A");
        }
    } else {
        out += "topology,n_cases,accuracy_pct,recall_pct,gap,n_failed_episodes\n";
        for (const auto& r : rows) {
            out += fmt::format("{},{},{},{},{},{}\n", topology_name(r.topology), r.n_cases,
                               fixed(r.accuracy_pct, 1), r.recall_pct ? fixed(*r.recall_pct, 1) : "N/A",
                               r.gap ? fixed(*r.gap, 1) : "N/A", r.n_failed_episodes);
        }
    }
    return out;
}

std::string render_category_grid(const std::vector<CategoryRow>& rows, ReportFormat format) {
    const auto cols = grid_columns(rows);
    std::string out;
    if (format == ReportFormat::kMarkdown) {
        out += "| Disease Type |";
        for (Topology t : cols) out += fmt::format(" {} |", display_name(t));
        out += "\n|---|";
        for (std::size_t i = 0; i < cols.size(); ++i) out += "---|";
        out += "\n";
        for (const auto& row : rows) {
            out += "| " + md_cell(row.category) + " |";
            for (Topology t : cols) {
                auto it = row.mean_score.find(t);
                out += " " + (it == row.mean_score.end() ? std::string("N/A") : fixed(it->second, 2)) + " |";
            }
            out += "\n";
        }
    } else {
        out += "category,case_count";
        for (Topology t : cols) out += "," + std::string(topology_name(t));
        out += "\n";
        for (const auto& row : rows) {
            out += csv_field(row.category) + "," + std::to_string(row.case_count);
            for (Topology t : cols) {
                auto it = row.mean_score.find(t);
                out += "," + (it == row.mean_score.end() ? std::string("N/A") : fixed(it->second, 2));
            }
            out += "\n";
        }
    }
    return out;
}

std::string render_histograms(const std::vector<MetricsSummary>& rows, ReportFormat format) {
    std::string out;
    if (format == ReportFormat::kMarkdown) {
        out += "| Topology | Score 0 | Score 5 | Score 10 | N |\n|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            out += fmt::format("| {} | {} | {} | {} | {} |\n", display_name(r.topology), r.histogram.zero,
                               r.histogram.five, r.histogram.ten, r.histogram.total());
        }
    } else {
        out += "topology,score_0,score_5,score_10,n\n";
        for (const auto& r : rows) {
            out += fmt::format("{},{},{},{},{}\n", topology_name(r.topology), r.histogram.zero,
                               r.histogram.five, r.histogram.ten, r.histogram.total());
        }
    }
    return out;
}

std::string render_delta_table(const std::vector<CategoryDelta>& rows, ReportFormat format) {
    std::vector<Topology> cols;
    for (Topology t : kAllTopologies) {
        for (const auto& row : rows) {
            if (row.delta.contains(t)) {
                cols.push_back(t);
                break;
            }
        }
    }
    std::string out;
    const bool md = format == ReportFormat::kMarkdown;
    if (md) {
        out += "| Disease Type |";
        for (Topology t : cols) out += fmt::format(" {} vs Control |", display_name(t));
        out += "\n|---|";
        for (std::size_t i = 0; i < cols.size(); ++i) out += "---|";
        out += "\n";
    } else {
        out += "category";
        for (Topology t : cols) out += "," + std::string(topology_name(t));
        out += "\n";
    }
    for (const auto& row : rows) {
        out += md ? "| " + md_cell(row.category) + " |" : csv_field(row.category);
        for (Topology t : cols) {
            auto it = row.delta.find(t);
            const std::string cell =
                it == row.delta.end() ? "N/A" : signed_fixed(it->second, md ? 1 : 2);
            out += md ? " " + cell + " |" : "," + cell;
        }
        out += "\n";
    }
    return out;
}

std::vector<fs::path> emit_report(const fs::path& out_dir, ReportFormat format) {
    const RunSummary summary = load_run_summary(out_dir);
    std::vector<fs::path> written;
    if (format == ReportFormat::kMarkdown) {
        std::string text = "# Topology evaluation report\n\n";
        text += fmt::format("Dataset SHA-256: `{}`  \nScorer: {}\n\n", summary.dataset_sha256,
                            scorer_name(summary.scorer));
        text += "## Summary\n\n" + render_summary_table(summary.topologies, format);
        text += "\n| Topology | N | Failed episodes |\n|---|---|---|\n";
        for (const auto& r : summary.topologies) {
            text += fmt::format("| {} | {} | {} |\n", display_name(r.topology), r.n_cases,
                                r.n_failed_episodes);
        }
        text += "\n## Score by disease category (0-10)\n\n" + render_category_grid(summary.categories, format);
        if (!summary.omitted_categories.empty()) {
            text += "\nOmitted (no scored cases):";
            for (const auto& c : summary.omitted_categories) text += " " + c + ";";
            text += "\n";
        }
        text += "\n## Score distribution\n\n" + render_histograms(summary.topologies, format);
        if (summary.delta_vs_control) {
            text += "\n## Change vs control by disease category (0-10)\n\n" +
                    render_delta_table(*summary.delta_vs_control, format);
        }
        written.push_back(out_dir / "report.md");
        write_file_atomic(written.back(), text);
    } else {
        written.push_back(out_dir / "summary.csv");
        write_file_atomic(written.back(), render_summary_table(summary.topologies, format));
        written.push_back(out_dir / "categories.csv");
        write_file_atomic(written.back(), render_category_grid(summary.categories, format));
        written.push_back(out_dir / "histograms.csv");
        write_file_atomic(written.back(), render_histograms(summary.topologies, format));
        if (summary.delta_vs_control) {
            written.push_back(out_dir / "delta_vs_control.csv");
            write_file_atomic(written.back(), render_delta_table(*summary.delta_vs_control, format));
        }
    }
    return written;
}

std::vector<CompareRow> compare_runs(const std::vector<fs::path>& dirs) {
    if (dirs.size() < 2) {
        throw Error(ErrorCode::kInvalidArgument, "compare needs at least two run directories");
    }
    std::vector<CompareRow> rows;
    std::string dataset;
    for (const auto& dir : dirs) {
        const RunSummary summary = load_run_summary(dir);
        if (dataset.empty()) {
            dataset = summary.dataset_sha256;
        } else if (summary.dataset_sha256 != dataset) {
            throw Error(ErrorCode::kDatasetMismatch,
                        dir.string() + " was run on a different dataset than " + dirs.front().string());
        }
        for (const auto& m : summary.topologies) rows.push_back({dir.string(), m});
    }
    return rows;
}

std::string render_compare_table(const std::vector<CompareRow>& rows) {
    std::string out =
        "| Run | Topology | N | Diagnostic Accuracy (%) | Reasoning Recall (%) | Reasoning Gap (Δ) | Failed |\n"
        "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", md_cell(r.run_label),
                           display_name(m.topology), m.n_cases, fixed(m.accuracy_pct, 1),
                           m.recall_pct ? fixed(*m.recall_pct, 1) : "N/A", m.gap ? fixed(*m.gap, 1) : "N/A",
                           m.n_failed_episodes);
    }
    return out;
}

}  // namespace topoclinic
