// topoclinic command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "topoclinic/topoclinic.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitFailedEpisodes = 2;

struct ConfigHandle {
    tc_config* ptr = nullptr;
    ConfigHandle() {
        if (tc_config_create(&ptr) != TC_OK) ptr = nullptr;
    }
    ~ConfigHandle() { tc_config_destroy(ptr); }
    ConfigHandle(const ConfigHandle&) = delete;
    ConfigHandle& operator=(const ConfigHandle&) = delete;
};

int report_error(tc_status status) {
    std::fprintf(stderr, "topoclinic: %s: %s\n", tc_status_name(status), tc_last_error());
    return kExitFatal;
}

// Option values keyed by config key; only options the user gave are applied.
using Settings = std::vector<std::pair<std::string, std::optional<std::string>>>;

tc_status apply(tc_config* cfg, const Settings& settings) {
    for (const auto& [key, value] : settings) {
        if (!value) continue;
        tc_status st = tc_config_set(cfg, key.c_str(), value->c_str());
        if (st != TC_OK) return st;
    }
    return TC_OK;
}

int finish(const tc_run_outcome& outcome) {
    std::printf("episodes: %zu total, %zu executed, %zu failed\n", outcome.episodes_total,
                outcome.episodes_executed, outcome.failed_episodes);
    return outcome.failed_episodes > 0 ? kExitFailedEpisodes : kExitOk;
}

std::optional<std::string>& opt(Settings& s, const char* key) {
    s.emplace_back(key, std::nullopt);
    return s.back().second;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent diagnostic topology evaluation harness"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tc_version()));

    // Settings hold references into their own storage, so reserve up front.
    Settings run_s;
    run_s.reserve(32);
    auto* run = app.add_subcommand("run", "Execute every case x topology episode, then score");
    run->add_option("--dataset", opt(run_s, "dataset"), "Case file")->required();
    run->add_option("--format", opt(run_s, "format"), "canonical-json | upstream-adapter");
    run->add_option("--topologies", opt(run_s, "topologies"),
                    "Comma list of control,hierarchical,adversarial,collaborative")
        ->required();
    run->add_option("--model", opt(run_s, "model"), "Agent model name");
    run->add_option("--judge-model", opt(run_s, "judge-model"), "Judge model name");
    run->add_option("--scorer", opt(run_s, "scorer"), "llm | exact");
    run->add_option("--templates", opt(run_s, "templates"), "Prompt template override dir");
    run->add_option("--synonyms", opt(run_s, "synonyms"), "Synonym table for the exact scorer");
    run->add_option("--concurrency", opt(run_s, "concurrency"), "Episode workers");
    run->add_option("--rpm", opt(run_s, "rpm"), "Requests per minute");
    run->add_option("--cache", opt(run_s, "cache"), "Response cache dir");
    run->add_option("--out", opt(run_s, "out"), "Output dir")->required();
    run->add_option("--provider", opt(run_s, "provider"), "live | scripted");
    run->add_option("--script", opt(run_s, "script"), "Script file for the scripted provider");
    run->add_option("--cases", opt(run_s, "cases"), "Comma list of case ids to run");
    run->add_option("--temperature", opt(run_s, "temperature"), "Sampling temperature");
    run->add_option("--max-tokens", opt(run_s, "max-tokens"), "Completion token cap");
    run->add_option("--retries", opt(run_s, "max-attempts"), "Attempts per request");
    run->add_option("--base-url", opt(run_s, "base-url"), "API base URL (or TOPOCLINIC_BASE_URL)");
    run->add_option("--api-key", opt(run_s, "api-key"), "API key (or TOPOCLINIC_API_KEY)");

    Settings resume_s;
    resume_s.reserve(16);
    std::string resume_out;
    auto* resume = app.add_subcommand("resume", "Finish an interrupted run");
    resume->add_option("--out", resume_out, "Output dir of the run")->required();
    resume->add_option("--model", opt(resume_s, "model"), "Must match the stored run");
    resume->add_option("--judge-model", opt(resume_s, "judge-model"), "Must match the stored run");
    resume->add_option("--dataset", opt(resume_s, "dataset"), "Must match the stored run");
    resume->add_option("--format", opt(resume_s, "format"), "Must match the stored run");
    resume->add_option("--topologies", opt(resume_s, "topologies"), "Must match the stored run");
    resume->add_option("--scorer", opt(resume_s, "scorer"), "Must match the stored run");
    resume->add_option("--templates", opt(resume_s, "templates"), "Must match the stored run");
    resume->add_option("--concurrency", opt(resume_s, "concurrency"), "Episode workers");
    resume->add_option("--rpm", opt(resume_s, "rpm"), "Requests per minute");
    resume->add_option("--cache", opt(resume_s, "cache"), "Response cache dir");
    resume->add_option("--base-url", opt(resume_s, "base-url"), "API base URL");
    resume->add_option("--api-key", opt(resume_s, "api-key"), "API key");

    Settings score_s;
    score_s.reserve(16);
    std::string score_out;
    auto* score = app.add_subcommand("score", "Re-score existing transcripts");
    score->add_option("--out", score_out, "Output dir of the run")->required();
    score->add_option("--scorer", opt(score_s, "scorer"), "llm | exact");
    score->add_option("--synonyms", opt(score_s, "synonyms"), "Synonym table");
    score->add_option("--judge-model", opt(score_s, "judge-model"), "Judge model name");
    score->add_option("--cache", opt(score_s, "cache"), "Response cache dir");
    score->add_option("--concurrency", opt(score_s, "concurrency"), "Judge workers");
    score->add_option("--base-url", opt(score_s, "base-url"), "API base URL");
    score->add_option("--api-key", opt(score_s, "api-key"), "API key");

    std::string report_out;
    std::string report_format = "markdown";
    auto* report = app.add_subcommand("report", "Write report files for a scored run");
    report->add_option("--out", report_out, "Output dir of the run")->required();
    report->add_option("--format", report_format, "markdown | csv");

    std::vector<std::string> compare_dirs;
    auto* compare = app.add_subcommand("compare", "Side-by-side summaries of several runs");
    compare->add_option("dirs", compare_dirs, "Output dirs")->required()->expected(2, -1);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed() || resume->parsed() || score->parsed()) {
        ConfigHandle cfg;
        if (cfg.ptr == nullptr) return report_error(TC_ERR_INTERNAL);
        const Settings& s = run->parsed() ? run_s : resume->parsed() ? resume_s : score_s;
        if (tc_status st = apply(cfg.ptr, s); st != TC_OK) return report_error(st);
        tc_run_outcome outcome{};
        tc_status st = run->parsed()      ? tc_run(cfg.ptr, &outcome)
                       : resume->parsed() ? tc_resume(resume_out.c_str(), cfg.ptr, &outcome)
                                          : tc_score(score_out.c_str(), cfg.ptr, &outcome);
        if (st != TC_OK) return report_error(st);
        return finish(outcome);
    }
    if (report->parsed()) {
        if (tc_status st = tc_report(report_out.c_str(), report_format.c_str()); st != TC_OK) {
            return report_error(st);
        }
        return kExitOk;
    }
    std::vector<const char*> dirs;
    for (const auto& d : compare_dirs) dirs.push_back(d.c_str());
    char* table = nullptr;
    if (tc_status st = tc_compare(dirs.data(), dirs.size(), &table); st != TC_OK) {
        return report_error(st);
    }
    std::fputs(table, stdout);
    tc_string_free(table);
    return kExitOk;
}
