#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topoclinic/adjudication.hpp"
#include "topoclinic/corpus.hpp"
#include "topoclinic/metrics.hpp"
#include "topoclinic/provider.hpp"
#include "topoclinic/topology.hpp"

namespace topoclinic {

enum class ProviderKind { kLive, kScripted };
std::string_view provider_kind_name(ProviderKind kind);
ProviderKind parse_provider_kind(std::string_view name);

struct RunConfig {
    // Binding settings: part of the run's identity, checked on resume.
    std::filesystem::path dataset;
    CorpusFormat format = CorpusFormat::kCanonicalJson;
    std::vector<Topology> topologies;
    std::string model = "gpt-5.1";
    std::string judge_model = "gpt-5.1";
    Scorer scorer = Scorer::kLlm;
    std::optional<std::filesystem::path> templates_dir;
    std::optional<std::filesystem::path> synonyms_path;
    std::vector<std::string> case_ids;  // empty = every case
    ProviderKind provider = ProviderKind::kLive;
    std::optional<std::filesystem::path> script_path;
    double temperature = 0.0;
    std::optional<std::int64_t> max_tokens;

    // Runtime settings: free to change between run and resume.
    std::filesystem::path out_dir;
    int concurrency = 4;
    double requests_per_minute = 60.0;
    std::optional<std::filesystem::path> cache_dir;
    std::string base_url;
    std::string api_key;
    int max_attempts = 3;

    /// Throws kConfig.
    void validate() const;

    /// Binding settings as JSON (paths made absolute). No secrets.
    nlohmann::json snapshot() const;
    static RunConfig from_snapshot(const nlohmann::json& snapshot);
};

/// Injection points for tests and embedders. Unset members are built from the
/// config.
struct RunHooks {
    std::shared_ptr<Provider> provider;
    std::shared_ptr<Provider> judge_provider;
    /// Simulated crash: stop after this many episodes have been persisted,
    /// leaving the output directory exactly as a killed process would.
    std::optional<std::size_t> stop_after_episodes;
};

struct RunOutcome {
    std::size_t episodes_total = 0;     // |cases| x |topologies|
    std::size_t episodes_executed = 0;  // by this invocation
    std::size_t failed_episodes = 0;    // in the finished artifacts
    bool complete = false;              // episodes finished and scored
};

/// File names inside an output directory.
struct RunFiles {
    static constexpr const char* kMetadata = "run.json";
    static constexpr const char* kTranscripts = "transcripts.jsonl";
    static constexpr const char* kScores = "scores.jsonl";
    static constexpr const char* kSummary = "summary.json";
};

/// Builds the provider stack for a config: backend, then for live runs rate
/// limiting and retry, then the cache when a cache dir is set.
std::shared_ptr<Provider> make_provider(const RunConfig& config);

RunOutcome run_experiment(const RunConfig& config, const RunHooks& hooks = {});

/// Settings supplied alongside `resume`. Binding fields that are set must
/// match the stored snapshot (kMetadataMismatch otherwise).
struct ResumeOptions {
    std::optional<std::string> model;
    std::optional<std::string> judge_model;
    std::optional<std::filesystem::path> dataset;
    std::optional<CorpusFormat> format;
    std::optional<std::vector<Topology>> topologies;
    std::optional<Scorer> scorer;
    std::optional<std::filesystem::path> templates_dir;

    std::optional<int> concurrency;
    std::optional<double> requests_per_minute;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::string> base_url;
    std::optional<std::string> api_key;
};

RunOutcome resume_experiment(const std::filesystem::path& out_dir, const ResumeOptions& options = {},
                             const RunHooks& hooks = {});

/// Re-scores existing transcripts without re-running episodes.
struct ScoreOptions {
    std::optional<Scorer> scorer;
    std::optional<std::filesystem::path> synonyms_path;
    std::optional<std::string> judge_model;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::string> base_url;
    std::optional<std::string> api_key;
    std::optional<int> concurrency;
};

RunOutcome score_run(const std::filesystem::path& out_dir, const ScoreOptions& options = {},
                     const RunHooks& hooks = {});

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { kMarkdown, kCsv };
ReportFormat parse_report_format(std::string_view name);

/// Everything a report needs; read from summary.json.
struct RunSummary {
    std::string dataset_sha256;
    Scorer scorer = Scorer::kExact;
    std::vector<MetricsSummary> topologies;
    std::vector<CategoryRow> categories;
    std::vector<std::string> omitted_categories;
    std::optional<std::vector<CategoryDelta>> delta_vs_control;
};

nlohmann::json to_json(const RunSummary& summary);
RunSummary run_summary_from_json(const nlohmann::json& j);

/// Reads a completed run's summary; throws kIncompleteArtifacts.
RunSummary load_run_summary(const std::filesystem::path& out_dir);

std::string render_summary_table(const std::vector<MetricsSummary>& rows, ReportFormat format);
std::string render_category_grid(const std::vector<CategoryRow>& rows, ReportFormat format);
std::string render_histograms(const std::vector<MetricsSummary>& rows, ReportFormat format);
std::string render_delta_table(const std::vector<CategoryDelta>& rows, ReportFormat format);

/// Writes report.md (markdown) or summary.csv, categories.csv, histograms.csv
/// and delta_vs_control.csv (csv) into the run directory. Returns the paths.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& out_dir,
                                               ReportFormat format);

struct CompareRow {
    std::string run_label;
    MetricsSummary metrics;
};

/// Side-by-side summaries; throws kDatasetMismatch if runs differ in data.
std::vector<CompareRow> compare_runs(const std::vector<std::filesystem::path>& dirs);
std::string render_compare_table(const std::vector<CompareRow>& rows);

}  // namespace topoclinic
