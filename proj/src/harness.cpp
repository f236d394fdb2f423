#include "topoclinic/harness.hpp"

#include <atomic>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "topoclinic/engine.hpp"
#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"
#include "topoclinic/templates.hpp"

namespace topoclinic {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view provider_kind_name(ProviderKind kind) {
    return kind == ProviderKind::kLive ? "live" : "scripted";
}

ProviderKind parse_provider_kind(std::string_view name) {
    if (name == "live") return ProviderKind::kLive;
    if (name == "scripted") return ProviderKind::kScripted;
    throw Error(ErrorCode::kConfig, "unknown provider '" + std::string(name) + "' (live or scripted)");
}

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
    if (topologies.empty()) {
        throw Error(ErrorCode::kConfig, "topology set is empty");
    }
    if (concurrency < 1) {
        throw Error(ErrorCode::kConfig, "concurrency must be >= 1");
    }
    if (dataset.empty()) {
        throw Error(ErrorCode::kConfig, "no dataset given");
    }
    if (out_dir.empty()) {
        throw Error(ErrorCode::kConfig, "no output directory given");
    }
    if (model.empty()) {
        throw Error(ErrorCode::kConfig, "model name is empty");
    }
    if (scorer == Scorer::kLlm && judge_model.empty()) {
        throw Error(ErrorCode::kConfig, "judge model name is empty");
    }
    if (!(requests_per_minute > 0.0)) {
        throw Error(ErrorCode::kConfig, "requests per minute must be positive");
    }
    if (!(temperature >= 0.0)) {
        throw Error(ErrorCode::kConfig, "temperature must be >= 0");
    }
    if (max_tokens && *max_tokens <= 0) {
        throw Error(ErrorCode::kConfig, "max_tokens must be positive");
    }
    if (max_attempts < 1) {
        throw Error(ErrorCode::kConfig, "max attempts must be >= 1");
    }
    if (provider == ProviderKind::kScripted && !script_path) {
        throw Error(ErrorCode::kConfig, "scripted provider needs a script file");
    }
    if (provider == ProviderKind::kLive && base_url.empty()) {
        throw Error(ErrorCode::kConfig,
                    "live provider needs a base url (TOPOCLINIC_BASE_URL or --base-url)");
    }
}

namespace {

json optional_path(const std::optional<fs::path>& p) {
    return p ? json(fs::absolute(*p).lexically_normal().string()) : json(nullptr);
}

std::optional<fs::path> read_optional_path(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return fs::path(it->get<std::string>());
}

std::string absolute_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

}  // namespace

json RunConfig::snapshot() const {
    json topo = json::array();
    for (Topology t : topologies) topo.push_back(topology_name(t));
    return json{{"dataset", absolute_string(dataset)},
                {"format", corpus_format_name(format)},
                {"topologies", std::move(topo)},
                {"model", model},
                {"judge_model", judge_model},
                {"scorer", scorer_name(scorer)},
                {"templates_dir", optional_path(templates_dir)},
                {"synonyms", optional_path(synonyms_path)},
                {"case_ids", case_ids},
                {"provider", provider_kind_name(provider)},
                {"script", optional_path(script_path)},
                {"temperature", temperature},
                {"max_tokens", max_tokens ? json(*max_tokens) : json(nullptr)}};
}

RunConfig RunConfig::from_snapshot(const json& j) {
    try {
        RunConfig config;
        config.dataset = j.at("dataset").get<std::string>();
        config.format = parse_corpus_format(j.at("format").get<std::string>());
        for (const auto& t : j.at("topologies")) config.topologies.push_back(parse_topology(t.get<std::string>()));
        config.model = j.at("model").get<std::string>();
        config.judge_model = j.at("judge_model").get<std::string>();
        config.scorer = parse_scorer(j.at("scorer").get<std::string>());
        config.templates_dir = read_optional_path(j, "templates_dir");
        config.synonyms_path = read_optional_path(j, "synonyms");
        config.case_ids = j.at("case_ids").get<std::vector<std::string>>();
        config.provider = parse_provider_kind(j.at("provider").get<std::string>());
        config.script_path = read_optional_path(j, "script");
        config.temperature = j.at("temperature").get<double>();
        if (const auto& mt = j.at("max_tokens"); !mt.is_null()) config.max_tokens = mt.get<std::int64_t>();
        return config;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("run config snapshot: ") + e.what());
    }
}

std::shared_ptr<Provider> make_provider(const RunConfig& config) {
    std::shared_ptr<Provider> provider;
    if (config.provider == ProviderKind::kScripted) {
        provider = std::make_shared<ScriptedProvider>(load_script(*config.script_path));
    } else {
        provider = std::make_shared<HttpProvider>(HttpProviderOptions{config.base_url, config.api_key});
        provider = std::make_shared<RateLimitedProvider>(
            provider, std::make_shared<TokenBucket>(config.requests_per_minute));
        provider = std::make_shared<RetryingProvider>(provider, RetryPolicy{config.max_attempts});
    }
    if (config.cache_dir) {
        provider = std::make_shared<CachedProvider>(provider, *config.cache_dir);
    }
    return provider;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kMetadataVersion = 1;
constexpr const char* kFailedEpisodePolicy =
    "failed episodes score 0; recall is computed from the partial transcript";

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& doc) {
    write_file_atomic(path, doc.dump(2) + "\n");
}

std::string pair_key(std::string_view case_id, Topology topology) {
    return std::string(case_id) + '\x1f' + std::string(topology_name(topology));
}

/// Serialized, flushed JSONL appends from many workers.
class JsonlAppender {
public:
    explicit JsonlAppender(const fs::path& path) : out_(path, std::ios::binary | std::ios::app) {
        if (!out_) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for append");
    }

    void append(const json& line) {
        const std::string text = line.dump() + "\n";
        std::lock_guard lock(mutex_);
        out_.write(text.data(), static_cast<std::streamsize>(text.size()));
        out_.flush();
        if (!out_) throw Error(ErrorCode::kIo, "transcript append failed");
    }

private:
    std::mutex mutex_;
    std::ofstream out_;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads; the first exception
/// is rethrown after every worker has stopped.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard lock(error_mutex);
                if (error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
    {
        std::vector<std::jthread> threads;
        threads.reserve(count);
        for (std::size_t t = 0; t < count; ++t) threads.emplace_back(body);
    }
    if (error) std::rethrow_exception(error);
}

/// Parsed transcripts file. A torn final line (crash mid-write) is dropped.
std::vector<EpisodeResult> read_transcripts(const fs::path& path) {
    std::vector<EpisodeResult> out;
    if (!fs::exists(path)) return out;
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            out.push_back(episode_from_json(json::parse(lines[i])));
        } catch (const std::exception& e) {
            if (i + 1 == lines.size()) {
                spdlog::warn("dropping torn last line of {}: {}", path.string(), e.what());
                break;
            }
            throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

std::vector<ScoreRecord> read_scores(const fs::path& path) {
    std::vector<ScoreRecord> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(score_record_from_json(json::parse(line)));
    }
    return out;
}

CaseCorpus select_cases(const CaseCorpus& corpus, const std::vector<std::string>& ids) {
    if (ids.empty()) return corpus;
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<CaseRecord> kept;
    for (const auto& record : corpus.cases()) {
        if (wanted.erase(record.id) > 0) kept.push_back(record);
    }
    if (!wanted.empty()) {
        throw Error(ErrorCode::kConfig, "case filter names unknown case \"" + *wanted.begin() + "\"");
    }
    return CaseCorpus(std::move(kept));
}

/// Loaded inputs of a run.
struct Workspace {
    RunConfig config;
    std::string dataset_sha256;
    CaseCorpus cases;  // after the case filter
    TemplateSet templates;
    SynonymTable synonyms;
};

Workspace open_workspace(const RunConfig& config) {
    const CaseCorpus full = load_cases(config.dataset, config.format);
    return Workspace{config,
                     full.content_hash(),
                     select_cases(full, config.case_ids),
                     config.templates_dir ? TemplateSet::load_dir(*config.templates_dir)
                                          : TemplateSet::builtin(),
                     config.synonyms_path ? SynonymTable::load(*config.synonyms_path) : SynonymTable()};
}

struct Pair {
    const CaseRecord* record;
    Topology topology;
};

std::vector<Pair> all_pairs(const Workspace& ws) {
    std::vector<Pair> pairs;
    for (const auto& record : ws.cases.cases()) {
        for (Topology t : ws.config.topologies) pairs.push_back({&record, t});
    }
    return pairs;
}

json metadata_for(const Workspace& ws) {
    json templates{{"version", ws.templates.version()},
                   {"sha256", ws.templates.hash()},
                   {"per_template", ws.templates.per_template_hashes()}};
    return json{{"metadata_version", kMetadataVersion},
                {"config", ws.config.snapshot()},
                {"dataset_sha256", ws.dataset_sha256},
                {"n_cases", ws.cases.size()},
                {"templates", std::move(templates)},
                {"synonyms_sha256", ws.synonyms.hash()},
                {"failed_episode_policy", kFailedEpisodePolicy},
                {"status", "running"},
                {"started_at", utc_now()},
                {"updated_at", utc_now()}};
}

/// Runs `pending` episodes, appending each result as soon as it finishes.
std::size_t execute(const Workspace& ws, const std::shared_ptr<Provider>& provider,
                    const std::vector<Pair>& pending, const fs::path& transcripts,
                    std::optional<std::size_t> stop_after) {
    EngineOptions options;
    options.model = ws.config.model;
    options.temperature = ws.config.temperature;
    options.max_tokens = ws.config.max_tokens;
    const TopologyEngine engine(provider, ws.templates, options);
    JsonlAppender appender(transcripts);
    const std::size_t limit = stop_after ? std::min(*stop_after, pending.size()) : pending.size();
    std::atomic<std::size_t> done{0};
    parallel_for(limit, ws.config.concurrency, [&](std::size_t i) {
        const EpisodeResult result = engine.run(*pending[i].record, pending[i].topology);
        if (!result.ok()) {
            spdlog::warn("episode {}/{} failed: {}", result.case_id, topology_name(result.topology),
                         result.failure_reason);
        }
        appender.append(to_json(result));
        ++done;
    });
    return done.load();
}

/// Latest entry per pair, in canonical order. Entries for pairs outside the
/// run are dropped.
std::vector<EpisodeResult> canonical_episodes(const Workspace& ws,
                                              const std::vector<EpisodeResult>& entries) {
    std::map<std::string, const EpisodeResult*> latest;
    for (const auto& e : entries) latest[pair_key(e.case_id, e.topology)] = &e;
    std::vector<EpisodeResult> out;
    for (const Pair& p : all_pairs(ws)) {
        auto it = latest.find(pair_key(p.record->id, p.topology));
        if (it != latest.end()) out.push_back(*it->second);
    }
    return out;
}

void write_transcripts(const fs::path& path, const std::vector<EpisodeResult>& episodes) {
    std::string text;
    for (const auto& e : episodes) text += to_json(e).dump() + "\n";
    write_file_atomic(path, text);
}

ScoreRecord score_episode(const EpisodeResult& episode, const CaseRecord& record, Scorer scorer,
                          const SynonymTable& synonyms, const LlmJudge* judge) {
    ScoreRecord score;
    score.case_id = episode.case_id;
    score.topology = episode.topology;
    score.category = record.category;
    score.scorer = scorer;
    score.episode_failed = !episode.ok();
    score.recall_hit = episode.topology == Topology::kControl
                           ? RecallHit::kNotApplicable
                           : (reasoning_recall_hit(episode.transcript, record.ground_truth)
                                  ? RecallHit::kTrue
                                  : RecallHit::kFalse);
    if (!episode.ok()) {
        score.score = 0;
        score.judge_rationale = "episode failed: " + episode.failure_reason;
        return score;
    }
    if (scorer == Scorer::kLlm && judge != nullptr) {
        try {
            const Judgment j = judge->judge(episode.final_diagnosis, record.ground_truth);
            score.score = j.score;
            score.judge_rationale = j.rationale;
            return score;
        } catch (const Error& e) {
            spdlog::warn("judge failed for {}/{} ({}); falling back to exact scorer", episode.case_id,
                         topology_name(episode.topology), e.what());
            score.scorer = Scorer::kExact;
            score.judge_rationale = "llm judge failed (" + std::string(error_code_name(e.code())) +
                                    "); scored by exact fallback";
        }
    }
    score.score = judge_exact(episode.final_diagnosis, record.ground_truth, synonyms);
    return score;
}

RunSummary build_summary(const Workspace& ws, const std::vector<ScoreRecord>& scores) {
    RunSummary summary;
    summary.dataset_sha256 = ws.dataset_sha256;
    summary.scorer = ws.config.scorer;
    summary.topologies = summarize(scores);
    summary.categories = category_breakdown(scores, ws.cases, &summary.omitted_categories);
    const bool has_control = std::find(ws.config.topologies.begin(), ws.config.topologies.end(),
                                       Topology::kControl) != ws.config.topologies.end();
    if (has_control && ws.config.topologies.size() > 1) {
        summary.delta_vs_control = delta_vs_control(summary.categories);
    }
    return summary;
}

std::shared_ptr<Provider> judge_provider_for(const Workspace& ws, const RunHooks& hooks) {
    if (hooks.judge_provider) return hooks.judge_provider;
    if (hooks.provider) return hooks.provider;
    return make_provider(ws.config);
}

/// Scores the canonical transcripts and writes scores + summary + metadata.
RunOutcome score_and_summarize(const Workspace& ws, const fs::path& out_dir, json& metadata,
                               const RunHooks& hooks) {
    const auto episodes = read_transcripts(out_dir / RunFiles::kTranscripts);
    const auto canonical = canonical_episodes(ws, episodes);
    const std::size_t expected = ws.cases.size() * ws.config.topologies.size();
    if (canonical.size() != expected) {
        throw Error(ErrorCode::kIncompleteArtifacts,
                    "transcripts hold " + std::to_string(canonical.size()) + " of " +
                        std::to_string(expected) + " episodes");
    }
    std::unique_ptr<LlmJudge> judge;
    if (ws.config.scorer == Scorer::kLlm) {
        judge = std::make_unique<LlmJudge>(judge_provider_for(ws, hooks), ws.config.judge_model,
                                           ws.templates, ws.config.temperature);
    }
    std::vector<ScoreRecord> scores(canonical.size());
    parallel_for(canonical.size(), ws.config.concurrency, [&](std::size_t i) {
        scores[i] = score_episode(canonical[i], *ws.cases.find(canonical[i].case_id), ws.config.scorer,
                                  ws.synonyms, judge.get());
    });
    std::string text;
    for (const auto& s : scores) text += to_json(s).dump() + "\n";
    write_file_atomic(out_dir / RunFiles::kScores, text);
    write_json_file(out_dir / RunFiles::kSummary, to_json(build_summary(ws, scores)));

    RunOutcome outcome;
    outcome.episodes_total = expected;
    outcome.complete = true;
    for (const auto& e : canonical) outcome.failed_episodes += e.ok() ? 0 : 1;
    metadata["status"] = "scored";
    metadata["failed_episodes"] = outcome.failed_episodes;
    metadata["updated_at"] = utc_now();
    write_json_file(out_dir / RunFiles::kMetadata, metadata);
    return outcome;
}

/// Executes whatever is still pending, then scores. Shared by run and resume.
RunOutcome drive(const Workspace& ws, const fs::path& out_dir, json& metadata,
                 const RunHooks& hooks, bool always_score) {
    const fs::path transcripts = out_dir / RunFiles::kTranscripts;
    // Rewrite first so a torn tail never gets appended to.
    const auto existing = canonical_episodes(ws, read_transcripts(transcripts));
    write_transcripts(transcripts, existing);

    std::set<std::string> settled;
    for (const auto& e : existing) {
        if (e.ok() || e.final) settled.insert(pair_key(e.case_id, e.topology));
    }
    std::vector<Pair> pending;
    for (const Pair& p : all_pairs(ws)) {
        if (!settled.contains(pair_key(p.record->id, p.topology))) pending.push_back(p);
    }
    const bool already_scored = metadata.value("status", "") == "scored";
    if (pending.empty() && already_scored && !always_score) {
        RunOutcome outcome;
        outcome.episodes_total = ws.cases.size() * ws.config.topologies.size();
        outcome.complete = true;
        outcome.failed_episodes = metadata.value("failed_episodes", std::size_t{0});
        return outcome;
    }

    std::size_t executed = 0;
    if (!pending.empty()) {
        metadata["status"] = "running";
        write_json_file(out_dir / RunFiles::kMetadata, metadata);
        const auto provider = hooks.provider ? hooks.provider : make_provider(ws.config);
        executed = execute(ws, provider, pending, transcripts, hooks.stop_after_episodes);
        if (executed < pending.size()) {
            RunOutcome outcome;
            outcome.episodes_total = ws.cases.size() * ws.config.topologies.size();
            outcome.episodes_executed = executed;
            return outcome;
        }
    }
    write_transcripts(transcripts, canonical_episodes(ws, read_transcripts(transcripts)));
    RunOutcome outcome = score_and_summarize(ws, out_dir, metadata, hooks);
    outcome.episodes_executed = executed;
    return outcome;
}

void check_binding(bool same, const std::string& what) {
    if (!same) throw Error(ErrorCode::kMetadataMismatch, what + " differs from the stored run");
}

}  // namespace

RunOutcome run_experiment(const RunConfig& config, const RunHooks& hooks) {
    config.validate();
    const Workspace ws = open_workspace(config);
    fs::create_directories(config.out_dir);
    if (fs::exists(config.out_dir / RunFiles::kMetadata)) {
        throw Error(ErrorCode::kConfig, config.out_dir.string() +
                                            " already holds a run; use resume or a fresh directory");
    }
    std::error_code ec;
    fs::remove(config.out_dir / RunFiles::kTranscripts, ec);
    json metadata = metadata_for(ws);
    write_json_file(config.out_dir / RunFiles::kMetadata, metadata);
    return drive(ws, config.out_dir, metadata, hooks, true);
}

namespace {

struct StoredRun {
    json metadata;
    RunConfig config;
};

StoredRun open_stored_run(const fs::path& out_dir) {
    const fs::path meta_path = out_dir / RunFiles::kMetadata;
    if (!fs::exists(meta_path)) {
        throw Error(ErrorCode::kConfig, out_dir.string() + " has no " + RunFiles::kMetadata);
    }
    StoredRun stored;
    stored.metadata = read_json_file(meta_path);
    if (stored.metadata.value("metadata_version", 0) != kMetadataVersion) {
        throw Error(ErrorCode::kMetadataMismatch, "unsupported run metadata version");
    }
    stored.config = RunConfig::from_snapshot(stored.metadata.at("config"));
    stored.config.out_dir = out_dir;
    return stored;
}

void apply_runtime(RunConfig& config, const std::optional<int>& concurrency,
                   const std::optional<std::filesystem::path>& cache_dir,
                   const std::optional<std::string>& base_url, const std::optional<std::string>& api_key) {
    if (concurrency) config.concurrency = *concurrency;
    if (cache_dir) config.cache_dir = *cache_dir;
    if (base_url) config.base_url = *base_url;
    if (api_key) config.api_key = *api_key;
}

Workspace reopen_workspace(const StoredRun& stored) {
    Workspace ws = open_workspace(stored.config);
    check_binding(ws.dataset_sha256 == stored.metadata.at("dataset_sha256").get<std::string>(),
                  "dataset content");
    check_binding(ws.templates.hash() == stored.metadata.at("templates").at("sha256").get<std::string>(),
                  "template set");
    return ws;
}

}  // namespace

RunOutcome resume_experiment(const fs::path& out_dir, const ResumeOptions& options,
                             const RunHooks& hooks) {
    StoredRun stored = open_stored_run(out_dir);
    RunConfig& config = stored.config;
    if (options.model) check_binding(*options.model == config.model, "model");
    if (options.judge_model) check_binding(*options.judge_model == config.judge_model, "judge model");
    if (options.dataset) check_binding(absolute_string(*options.dataset) == absolute_string(config.dataset), "dataset path");
    if (options.format) check_binding(*options.format == config.format, "dataset format");
    if (options.topologies) check_binding(*options.topologies == config.topologies, "topology set");
    if (options.scorer) check_binding(*options.scorer == config.scorer, "scorer");
    if (options.templates_dir) {
        check_binding(config.templates_dir &&
                          absolute_string(*options.templates_dir) == absolute_string(*config.templates_dir),
                      "templates dir");
    }
    apply_runtime(config, options.concurrency, options.cache_dir, options.base_url, options.api_key);
    if (options.requests_per_minute) config.requests_per_minute = *options.requests_per_minute;
    if (config.provider == ProviderKind::kLive && config.base_url.empty() && !hooks.provider) {
        throw Error(ErrorCode::kConfig, "live provider needs a base url (TOPOCLINIC_BASE_URL or --base-url)");
    }
    const Workspace ws = reopen_workspace(stored);
    return drive(ws, out_dir, stored.metadata, hooks, false);
}

RunOutcome score_run(const fs::path& out_dir, const ScoreOptions& options, const RunHooks& hooks) {
    StoredRun stored = open_stored_run(out_dir);
    RunConfig& config = stored.config;
    if (options.scorer) config.scorer = *options.scorer;
    if (options.synonyms_path) config.synonyms_path = *options.synonyms_path;
    if (options.judge_model) config.judge_model = *options.judge_model;
    apply_runtime(config, options.concurrency, options.cache_dir, options.base_url, options.api_key);
    Workspace ws = reopen_workspace(stored);
    stored.metadata["config"] = config.snapshot();
    stored.metadata["synonyms_sha256"] = ws.synonyms.hash();
    return score_and_summarize(ws, out_dir, stored.metadata, hooks);
}

}  // namespace topoclinic
