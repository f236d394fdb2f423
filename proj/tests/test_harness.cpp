#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "topoclinic/error.hpp"
#include "topoclinic/harness.hpp"

using namespace topoclinic;
using testsupport::CaseAnswers;
using testsupport::read_text;
using testsupport::TempDir;
using testsupport::write_text;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kSynonyms = TOPOCLINIC_SOURCE_DIR "/data/synonyms.json";

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::kInvalidArgument;
}

std::vector<std::string> lines_of(const fs::path& path) {
    std::vector<std::string> out;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

/// Four cases over three categories with a fully scripted backend.
struct Fixture {
    TempDir dir;
    fs::path dataset = dir / "cases.json";
    fs::path script = dir / "script.json";

    explicit Fixture(bool with_judge = false) {
        using T = Topology;
        testsupport::write_corpus(dataset, {
                                               testsupport::make_case("c1", "Neuro", "Viral Meningitis"),
                                               testsupport::make_case("c2", "Neuro", "Fabry Disease"),
                                               testsupport::make_case("c3", "Endocrine", "PCOS"),
                                               testsupport::make_case("c4", "Allergic", "Urticaria"),
                                           });
        auto entries = testsupport::full_script({
            {"c1", {{T::kControl, "Viral Meningitis"}, {T::kHierarchical, "Meningitis"},
                    {T::kAdversarial, "Appendicitis"}, {T::kCollaborative, "Viral Meningitis"}}},
            {"c2", {{T::kControl, "Gaucher Disease"}, {T::kHierarchical, "Fabry Disease"},
                    {T::kAdversarial, "Fabry Disease"}, {T::kCollaborative, "Fabry Disease"}}},
            {"c3", {{T::kControl, "Stein-Leventhal Syndrome"}, {T::kHierarchical, "PCOS"},
                    {T::kAdversarial, "Diabetes Mellitus"}, {T::kCollaborative, "PCOS"}}},
            {"c4", {{T::kControl, "Urticaria"}, {T::kHierarchical, "Urticaria"},
                    {T::kAdversarial, "Urticaria"}, {T::kCollaborative, "Urticaria"}}},
        });
        if (with_judge) {
            entries.push_back({{"Medical Adjudicator"}, "Judged.\nSCORE: 10", true});
        }
        write_text(script, testsupport::script_to_json(entries).dump(2));
    }

    RunConfig config(const std::string& out, std::vector<Topology> topologies = {
                                                 kAllTopologies.begin(), kAllTopologies.end()}) const {
        RunConfig c;
        c.dataset = dataset;
        c.topologies = std::move(topologies);
        c.scorer = Scorer::kExact;
        c.synonyms_path = kSynonyms;
        c.provider = ProviderKind::kScripted;
        c.script_path = script;
        c.out_dir = dir / out;
        c.concurrency = 4;
        return c;
    }
};

json metadata_without_timestamps(const fs::path& dir) {
    json j = json::parse(read_text(dir / "run.json"));
    j.erase("started_at");
    j.erase("updated_at");
    return j;
}

void check_same_artifacts(const fs::path& a, const fs::path& b) {
    for (const char* name : {"transcripts.jsonl", "scores.jsonl", "summary.json"}) {
        CHECK_MESSAGE(read_text(a / name) == read_text(b / name), name);
    }
    CHECK(metadata_without_timestamps(a) == metadata_without_timestamps(b));
}

}  // namespace

TEST_CASE("golden run: three cases, control only") {
    TempDir dir;
    const fs::path dataset = dir / "cases.json";
    testsupport::write_corpus(dataset, {
                                           testsupport::make_case("g1", "A", "Fabry Disease"),
                                           testsupport::make_case("g2", "A", "Duchenne Muscular Dystrophy"),
                                           testsupport::make_case("g3", "B", "Gout"),
                                       });
    const auto entries = testsupport::full_script({
        {"g1", {{Topology::kControl, "Fabry disease"}}},
        {"g2", {{Topology::kControl, "Muscular Dystrophy"}}},
        {"g3", {{Topology::kControl, "Septic Arthritis"}}},
    });
    write_text(dir / "script.json", testsupport::script_to_json(entries).dump());
    RunConfig c;
    c.dataset = dataset;
    c.topologies = {Topology::kControl};
    c.scorer = Scorer::kExact;
    c.provider = ProviderKind::kScripted;
    c.script_path = dir / "script.json";
    c.out_dir = dir / "out";

    const RunOutcome outcome = run_experiment(c);
    CHECK(outcome.complete);
    CHECK(outcome.episodes_total == 3);
    CHECK(outcome.episodes_executed == 3);
    CHECK(outcome.failed_episodes == 0);

    const auto transcripts = lines_of(c.out_dir / "transcripts.jsonl");
    REQUIRE(transcripts.size() == 3);
    CHECK(json::parse(transcripts[0])["case_id"] == "g1");
    CHECK(json::parse(transcripts[2])["case_id"] == "g3");
    const auto scores = lines_of(c.out_dir / "scores.jsonl");
    REQUIRE(scores.size() == 3);
    CHECK(json::parse(scores[0])["score"] == 10);
    CHECK(json::parse(scores[1])["score"] == 5);
    CHECK(json::parse(scores[2])["score"] == 0);
    CHECK(json::parse(scores[0])["recall_hit"].is_null());

    // (10 + 5 + 0) / 3 * 10
    const RunSummary summary = load_run_summary(c.out_dir);
    REQUIRE(summary.topologies.size() == 1);
    CHECK(summary.topologies[0].accuracy_pct == 50.0);
    CHECK_FALSE(summary.delta_vs_control.has_value());

    const json meta = json::parse(read_text(c.out_dir / "run.json"));
    CHECK(meta["status"] == "scored");
    CHECK(meta["dataset_sha256"].get<std::string>().size() == 64);
    CHECK(meta["templates"]["version"] == "v1");
    CHECK(meta["templates"]["per_template"].size() == 13);
    CHECK(meta.contains("failed_episode_policy"));
    CHECK(meta["config"]["model"] == "gpt-5.1");
    CHECK(meta.dump().find("api_key") == std::string::npos);
}

TEST_CASE("full run over all topologies") {
    Fixture f;
    const RunConfig c = f.config("out");
    const RunOutcome outcome = run_experiment(c);
    CHECK(outcome.episodes_total == 16);
    CHECK(outcome.failed_episodes == 0);
    CHECK(lines_of(c.out_dir / "transcripts.jsonl").size() == 16);

    const RunSummary s = load_run_summary(c.out_dir);
    REQUIRE(s.topologies.size() == 4);
    // control: 10, 0, 10 (synonym), 10
    CHECK(s.topologies[0].accuracy_pct == 75.0);
    // hierarchical: 5, 10, 10, 10
    CHECK(s.topologies[1].accuracy_pct == 87.5);
    CHECK(s.topologies[1].recall_pct == 75.0);
    CHECK(s.topologies[1].gap == -12.5);
    // adversarial: 0, 10, 0, 10; truth appears only in the judge line for c2, c4
    CHECK(s.topologies[2].accuracy_pct == 50.0);
    CHECK(s.topologies[2].recall_pct == 50.0);
    CHECK(s.topologies[3].accuracy_pct == 100.0);
    REQUIRE(s.delta_vs_control.has_value());
    REQUIRE(s.categories.size() == 3);
    CHECK(s.categories[0].category == "Allergic");
    CHECK(s.categories[2].category == "Neuro");
    CHECK(s.categories[2].mean_score.at(Topology::kControl) == 5.0);
    CHECK(s.categories[2].mean_score.at(Topology::kHierarchical) == 7.5);

    // Canonical order: case order x topology order.
    const auto lines = lines_of(c.out_dir / "transcripts.jsonl");
    std::size_t i = 0;
    for (const char* id : {"c1", "c2", "c3", "c4"}) {
        for (Topology t : kAllTopologies) {
            const json e = json::parse(lines[i++]);
            CHECK(e["case_id"] == id);
            CHECK(e["topology"] == std::string(topology_name(t)));
            CHECK(e["transcript"].size() == expected_turns(t));
        }
    }
}

TEST_CASE("concurrency 1 and 8 give identical artifacts") {
    Fixture f;
    RunConfig one = f.config("c1");
    one.concurrency = 1;
    RunConfig eight = f.config("c8");
    eight.concurrency = 8;
    run_experiment(one);
    // Jitter shuffles completion order in the parallel run.
    RunHooks hooks;
    hooks.provider = std::make_shared<testsupport::JitterProvider>(make_provider(eight), 3);
    run_experiment(eight, hooks);
    check_same_artifacts(one.out_dir, eight.out_dir);
    emit_report(one.out_dir, ReportFormat::kMarkdown);
    emit_report(eight.out_dir, ReportFormat::kMarkdown);
    CHECK(read_text(one.out_dir / "report.md") == read_text(eight.out_dir / "report.md"));
}

TEST_CASE("kill at every episode boundary, then resume") {
    Fixture f;
    const RunConfig reference = f.config("reference");
    run_experiment(reference);
    for (std::size_t k = 0; k < 16; ++k) {
        CAPTURE(k);
        const RunConfig c = f.config("killed-" + std::to_string(k));
        RunHooks crash;
        crash.stop_after_episodes = k;
        const RunOutcome partial = run_experiment(c, crash);
        CHECK_FALSE(partial.complete);
        CHECK(partial.episodes_executed == k);
        CHECK(lines_of(c.out_dir / "transcripts.jsonl").size() == k);
        CHECK(code_of([&] { load_run_summary(c.out_dir); }) == ErrorCode::kIncompleteArtifacts);

        const RunOutcome resumed = resume_experiment(c.out_dir);
        CHECK(resumed.complete);
        CHECK(resumed.episodes_executed == 16 - k);
        check_same_artifacts(reference.out_dir, c.out_dir);
    }
}

TEST_CASE("killed after 2 of 4 episodes, resume runs exactly 2") {
    Fixture f;
    RunConfig c = f.config("out", {Topology::kControl});
    RunHooks crash;
    crash.stop_after_episodes = 2;
    CHECK(run_experiment(c, crash).episodes_executed == 2);
    CHECK(resume_experiment(c.out_dir).episodes_executed == 2);
    CHECK(lines_of(c.out_dir / "transcripts.jsonl").size() == 4);
}

TEST_CASE("resume drops a torn final line") {
    Fixture f;
    const RunConfig reference = f.config("reference");
    run_experiment(reference);
    const RunConfig c = f.config("torn");
    RunHooks crash;
    crash.stop_after_episodes = 5;
    run_experiment(c, crash);
    {
        std::ofstream out(c.out_dir / "transcripts.jsonl", std::ios::app);
        out << "{\"case_id\": \"c2\", \"topol";
    }
    CHECK(resume_experiment(c.out_dir).episodes_executed == 11);
    check_same_artifacts(reference.out_dir, c.out_dir);
}

TEST_CASE("resume of a complete run executes nothing") {
    Fixture f;
    const RunConfig c = f.config("out");
    run_experiment(c);
    const std::string before = read_text(c.out_dir / "scores.jsonl");
    const RunOutcome again = resume_experiment(c.out_dir);
    CHECK(again.episodes_executed == 0);
    CHECK(again.complete);
    CHECK(read_text(c.out_dir / "scores.jsonl") == before);
}

TEST_CASE("resume checks binding settings") {
    Fixture f;
    const RunConfig c = f.config("out");
    run_experiment(c);
    ResumeOptions other_model;
    other_model.model = "another-model";
    CHECK(code_of([&] { resume_experiment(c.out_dir, other_model); }) == ErrorCode::kMetadataMismatch);
    ResumeOptions other_topologies;
    other_topologies.topologies = std::vector{Topology::kControl};
    CHECK(code_of([&] { resume_experiment(c.out_dir, other_topologies); }) == ErrorCode::kMetadataMismatch);
    ResumeOptions same;
    same.model = "gpt-5.1";
    same.concurrency = 2;
    CHECK_NOTHROW(resume_experiment(c.out_dir, same));

    // Dataset edited after the run.
    testsupport::write_corpus(f.dataset, {testsupport::make_case("c1", "Neuro", "Changed")});
    CHECK(code_of([&] { resume_experiment(c.out_dir); }) == ErrorCode::kMetadataMismatch);
}

TEST_CASE("configuration errors abort before any episode") {
    Fixture f;
    RunConfig empty = f.config("empty", {});
    CHECK(code_of([&] { run_experiment(empty); }) == ErrorCode::kConfig);
    CHECK_FALSE(fs::exists(empty.out_dir / "run.json"));

    RunConfig zero = f.config("zero");
    zero.concurrency = 0;
    CHECK(code_of([&] { run_experiment(zero); }) == ErrorCode::kConfig);

    RunConfig live = f.config("live");
    live.provider = ProviderKind::kLive;
    live.base_url.clear();
    CHECK(code_of([&] { run_experiment(live); }) == ErrorCode::kConfig);

    RunConfig missing = f.config("missing");
    missing.dataset = f.dir / "absent.json";
    CHECK(code_of([&] { run_experiment(missing); }) == ErrorCode::kIo);

    RunConfig filter = f.config("filter");
    filter.case_ids = {"c1", "nope"};
    CHECK(code_of([&] { run_experiment(filter); }) == ErrorCode::kConfig);

    const RunConfig twice = f.config("twice", {Topology::kControl});
    run_experiment(twice);
    CHECK(code_of([&] { run_experiment(twice); }) == ErrorCode::kConfig);
}

TEST_CASE("case filter restricts the run") {
    Fixture f;
    RunConfig c = f.config("out", {Topology::kControl, Topology::kHierarchical});
    c.case_ids = {"c3", "c1"};
    const RunOutcome outcome = run_experiment(c);
    CHECK(outcome.episodes_total == 4);
    const auto lines = lines_of(c.out_dir / "transcripts.jsonl");
    REQUIRE(lines.size() == 4);
    CHECK(json::parse(lines[0])["case_id"] == "c1");
    CHECK(json::parse(lines[3])["case_id"] == "c3");
}

TEST_CASE("per-episode failures are recorded, not fatal") {
    Fixture f;
    const RunConfig c = f.config("out", {Topology::kControl, Topology::kAdversarial});
    auto scripted = make_provider(c);
    auto flaky = std::make_shared<testsupport::FunctionProvider>(
        [scripted](const ChatRequest& r, int) -> ChatResponse {
            const std::string prompt = r.rendered_prompt();
            if (prompt.find("[case-token:c2]") != std::string::npos &&
                prompt.find("Critic in a structured") != std::string::npos) {
                throw Error(ErrorCode::kTransport, "connection reset");
            }
            if (prompt.find("[case-token:c3]") != std::string::npos &&
                prompt.find("Expert Medical Diagnostician") != std::string::npos) {
                return testsupport::reply("No idea.");
            }
            return scripted->complete(r);
        });
    RunHooks hooks;
    hooks.provider = flaky;
    const RunOutcome first = run_experiment(c, hooks);
    CHECK(first.complete);
    CHECK(first.failed_episodes == 2);
    const auto scores = lines_of(c.out_dir / "scores.jsonl");
    const json failed_transport = json::parse(scores[3]);  // c2 adversarial
    CHECK(failed_transport["episode_failed"] == true);
    CHECK(failed_transport["score"] == 0);
    const json meta = json::parse(read_text(c.out_dir / "run.json"));
    CHECK(meta["failed_episodes"] == 2);

    // Resume retries only the transient failure; the missing marker is final.
    const RunOutcome resumed = resume_experiment(c.out_dir);
    CHECK(resumed.episodes_executed == 1);
    CHECK(resumed.failed_episodes == 1);
    const json c2_adv = json::parse(lines_of(c.out_dir / "transcripts.jsonl")[3]);
    CHECK(c2_adv["status"] == "ok");
}

TEST_CASE("llm scorer, then rescoring with the exact scorer") {
    Fixture f(true);
    RunConfig c = f.config("out", {Topology::kControl});
    c.scorer = Scorer::kLlm;
    run_experiment(c);
    CHECK(load_run_summary(c.out_dir).topologies[0].accuracy_pct == 100.0);
    const json first = json::parse(lines_of(c.out_dir / "scores.jsonl")[0]);
    CHECK(first["scorer"] == "llm");
    CHECK(first["judge_rationale"].get<std::string>().find("Judged.") != std::string::npos);

    const std::string transcripts = read_text(c.out_dir / "transcripts.jsonl");
    ScoreOptions options;
    options.scorer = Scorer::kExact;
    const RunOutcome rescored = score_run(c.out_dir, options);
    CHECK(rescored.episodes_executed == 0);
    CHECK(read_text(c.out_dir / "transcripts.jsonl") == transcripts);
    CHECK(load_run_summary(c.out_dir).topologies[0].accuracy_pct == 75.0);
    CHECK(json::parse(lines_of(c.out_dir / "scores.jsonl")[0])["scorer"] == "exact");
    const json meta = json::parse(read_text(c.out_dir / "run.json"));
    CHECK(meta["config"]["scorer"] == "exact");
}

TEST_CASE("llm judge failure falls back to the exact scorer") {
    Fixture f;
    RunConfig c = f.config("out", {Topology::kControl});
    c.scorer = Scorer::kLlm;
    RunHooks hooks;
    hooks.judge_provider = std::make_shared<testsupport::FunctionProvider>(
        [](const ChatRequest&, int) -> ChatResponse { return testsupport::reply("SCORE: 7"); });
    run_experiment(c, hooks);
    const json s = json::parse(lines_of(c.out_dir / "scores.jsonl")[0]);
    CHECK(s["scorer"] == "exact");
    CHECK(s["score"] == 10);
    CHECK(s["judge_rationale"].get<std::string>().find("MalformedJudgment") != std::string::npos);
}

TEST_CASE("cache directory serves repeated runs") {
    Fixture f;
    RunConfig a = f.config("a", {Topology::kControl});
    a.cache_dir = f.dir / "cache";
    run_experiment(a);
    RunConfig b = f.config("b", {Topology::kControl});
    b.cache_dir = f.dir / "cache";
    run_experiment(b);
    const json e = json::parse(lines_of(b.out_dir / "transcripts.jsonl")[0]);
    CHECK(e["transcript"][0]["provider_tag"] == "cache-hit");
    // Scores do not depend on where responses came from.
    CHECK(read_text(a.out_dir / "scores.jsonl") == read_text(b.out_dir / "scores.jsonl"));
}

TEST_CASE("config snapshot round trip") {
    Fixture f;
    RunConfig c = f.config("out");
    c.max_tokens = 512;
    c.temperature = 0.2;
    c.case_ids = {"c1"};
    const RunConfig back = RunConfig::from_snapshot(c.snapshot());
    CHECK(back.snapshot() == c.snapshot());
    CHECK(back.max_tokens == 512);
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::vector<ScoreRecord> table1_records() {
    // N = 1000 per topology; tens and recall hits chosen to hit each row exactly.
    struct Row {
        Topology t;
        int tens;
        int hits;
    };
    const Row rows[] = {{Topology::kControl, 485, 0},
                        {Topology::kHierarchical, 500, 540},
                        {Topology::kAdversarial, 273, 440},
                        {Topology::kCollaborative, 498, 513}};
    std::vector<ScoreRecord> out;
    for (const auto& row : rows) {
        for (int i = 0; i < 1000; ++i) {
            ScoreRecord r;
            r.case_id = "case-" + std::to_string(i);
            r.topology = row.t;
            r.score = i < row.tens ? 10 : 0;
            r.recall_hit = row.t == Topology::kControl ? RecallHit::kNotApplicable
                           : i < row.hits             ? RecallHit::kTrue
                                                      : RecallHit::kFalse;
            out.push_back(r);
        }
    }
    return out;
}

void write_scored_run(const fs::path& dir, const RunSummary& summary) {
    write_text(dir / "run.json", json{{"status", "scored"}}.dump());
    write_text(dir / "summary.json", to_json(summary).dump(2));
}

}  // namespace

TEST_CASE("summary table reproduces the reference row shape") {
    const auto summary = summarize(table1_records());
    const std::string md = render_summary_table(summary, ReportFormat::kMarkdown);
    CHECK(md.find("| Topology | Diagnostic Accuracy (%) | Reasoning Recall (%) | Reasoning Gap (\xCE\x94) |") == 0);
    CHECK(md.find("| Control (Baseline) | 48.5% | N/A | N/A |\n") != std::string::npos);
    CHECK(md.find("| Hierarchical | 50.0% | 54.0% | 4.0 |\n") != std::string::npos);
    CHECK(md.find("| Collaborative | 49.8% | 51.3% | 1.5 |\n") != std::string::npos);
    CHECK(md.find("| Adversarial | 27.3% | 44.0% | 16.7 |\n") != std::string::npos);
    CHECK(summary[1].gap == 4.0);
    CHECK(summary[2].gap == 16.7);
    CHECK(summary[3].gap == 1.5);

    const std::string csv = render_summary_table(summary, ReportFormat::kCsv);
    CHECK(csv.find("control,1000,48.5,N/A,N/A,0\n") != std::string::npos);
    CHECK(csv.find("hierarchical,1000,50.0,54.0,4.0,0\n") != std::string::npos);
}

TEST_CASE("category grid and delta rendering") {
    const std::vector<CategoryRow> rows = {
        {"Allergic", 2, {{Topology::kControl, 10.0}, {Topology::kHierarchical, 9.0}}},
        {"Respiratory", 7, {{Topology::kControl, 10.0 / 7.0}, {Topology::kHierarchical, 5.0}}},
        {"Thoracic Surgical", 2, {{Topology::kControl, 2.5}, {Topology::kHierarchical, 2.5}}},
    };
    const std::string md = render_category_grid(rows, ReportFormat::kMarkdown);
    CHECK(md.find("| Disease Type | Control | Hierarchical |") == 0);
    CHECK(md.find("| Allergic | 10.00 | 9.00 |") != std::string::npos);
    CHECK(md.find("| Respiratory | 1.43 | 5.00 |") != std::string::npos);
    const std::string csv = render_category_grid(rows, ReportFormat::kCsv);
    CHECK(csv.find("Allergic,2,10.00,9.00\n") != std::string::npos);

    const auto deltas = delta_vs_control(rows);
    const std::string dmd = render_delta_table(deltas, ReportFormat::kMarkdown);
    CHECK(dmd.find("| Allergic | -1.0 |") != std::string::npos);
    CHECK(dmd.find("| Respiratory | +3.6 |") != std::string::npos);
    CHECK(dmd.find("| Thoracic Surgical | 0.0 |") != std::string::npos);
    const std::string dcsv = render_delta_table(deltas, ReportFormat::kCsv);
    CHECK(dcsv.find("Respiratory,+3.57\n") != std::string::npos);
}

TEST_CASE("histogram rendering") {
    MetricsSummary m;
    m.topology = Topology::kAdversarial;
    m.histogram = {3, 2, 1};
    const std::string md = render_histograms({m}, ReportFormat::kMarkdown);
    CHECK(md.find("| Adversarial | 3 | 2 | 1 | 6 |") != std::string::npos);
    CHECK(render_histograms({m}, ReportFormat::kCsv) == "topology,score_0,score_5,score_10,n\nadversarial,3,2,1,6\n");
}

TEST_CASE("emit report from artifacts") {
    TempDir dir;
    RunSummary summary;
    summary.dataset_sha256 = std::string(64, 'a');
    summary.topologies = summarize(table1_records());
    summary.categories = {{"Allergic", 2, {{Topology::kControl, 10.0}, {Topology::kCollaborative, 10.0}}}};
    summary.delta_vs_control = delta_vs_control(summary.categories);
    write_scored_run(dir.path(), summary);

    const auto md_files = emit_report(dir.path(), ReportFormat::kMarkdown);
    REQUIRE(md_files.size() == 1);
    const std::string report = read_text(md_files[0]);
    CHECK(report.find("| Hierarchical | 50.0% | 54.0% | 4.0 |") != std::string::npos);
    CHECK(report.find("| Allergic | 10.00 | 10.00 |") != std::string::npos);
    // Re-emission is byte-identical.
    emit_report(dir.path(), ReportFormat::kMarkdown);
    CHECK(read_text(md_files[0]) == report);

    const auto csv_files = emit_report(dir.path(), ReportFormat::kCsv);
    CHECK(csv_files.size() == 4);
    for (const auto& p : csv_files) CHECK(fs::exists(p));
    CHECK(read_text(dir / "categories.csv").find("Allergic,2,10.00,10.00") != std::string::npos);
}

TEST_CASE("report requires complete artifacts") {
    TempDir dir;
    CHECK(code_of([&] { emit_report(dir.path(), ReportFormat::kMarkdown); }) == ErrorCode::kIncompleteArtifacts);
    write_text(dir / "run.json", json{{"status", "running"}}.dump());
    write_text(dir / "summary.json", "{}");
    CHECK(code_of([&] { emit_report(dir.path(), ReportFormat::kCsv); }) == ErrorCode::kIncompleteArtifacts);
    CHECK(code_of([] { parse_report_format("pdf"); }) == ErrorCode::kConfig);
}

TEST_CASE("compare runs") {
    Fixture f;
    const RunConfig a = f.config("a", {Topology::kControl, Topology::kHierarchical});
    const RunConfig b = f.config("b", {Topology::kControl, Topology::kHierarchical});
    run_experiment(a);
    run_experiment(b);
    const auto rows = compare_runs({a.out_dir, b.out_dir});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].run_label == a.out_dir.string());
    CHECK(rows[2].run_label == b.out_dir.string());
    CHECK(to_json(rows[0].metrics) == to_json(rows[2].metrics));
    CHECK(to_json(rows[1].metrics) == to_json(rows[3].metrics));
    const std::string table = render_compare_table(rows);
    CHECK(std::count(table.begin(), table.end(), '\n') == 6);

    CHECK(code_of([&] { compare_runs({a.out_dir}); }) == ErrorCode::kInvalidArgument);

    TempDir other;
    RunSummary s;
    s.dataset_sha256 = std::string(64, 'b');
    write_scored_run(other.path(), s);
    CHECK(code_of([&] { compare_runs({a.out_dir, other.path()}); }) == ErrorCode::kDatasetMismatch);
}
