#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>

#include "plain_fixtures.hpp"

using plain::TempDir;

namespace {

struct Result {
    int exit_code;
    std::string output;
};

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

Result cli(const std::vector<std::string>& args) {
    std::string cmd = quote(TOPOCLINIC_CLI);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

struct Workspace {
    TempDir dir;
    std::string dataset = (dir / "cases.json").string();
    std::string script = (dir / "script.json").string();

    explicit Workspace(bool failing = false) {
        plain::write_cases(dataset, {{"a", "Allergic", "Urticaria"}, {"b", "Neuro", "Fabry Disease"}});
        plain::write_text(script, plain::script_for({
                                                        {"a", {{"control", "Urticaria"}, {"collaborative", "Urticaria"}}},
                                                        {"b", {{"control", failing ? "" : "Fabry Disease"},
                                                               {"collaborative", "Fabry"}}},
                                                    })
                                      .dump());
    }

    std::vector<std::string> run_args(const std::string& out) const {
        return {"run",        "--dataset",  dataset,  "--topologies", "control,collaborative",
                "--scorer",   "exact",      "--provider", "scripted", "--script",
                script,       "--out",      (dir / out).string()};
    }
};

}  // namespace

TEST_CASE("run, report, compare") {
    Workspace w;
    const Result run = cli(w.run_args("one"));
    INFO(run.output);
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("episodes: 4 total, 4 executed, 0 failed") != std::string::npos);
    REQUIRE(cli(w.run_args("two")).exit_code == 0);

    const Result report = cli({"report", "--out", (w.dir / "one").string()});
    CHECK(report.exit_code == 0);
    const std::string md = plain::read_text(w.dir / "one" / "report.md");
    CHECK(md.find("| Control (Baseline) | 100.0% | N/A | N/A |") != std::string::npos);
    CHECK(md.find("| Collaborative | 75.0% |") != std::string::npos);
    CHECK(cli({"report", "--out", (w.dir / "one").string(), "--format", "csv"}).exit_code == 0);
    CHECK(std::filesystem::exists(w.dir / "one" / "delta_vs_control.csv"));

    const Result cmp = cli({"compare", (w.dir / "one").string(), (w.dir / "two").string()});
    CHECK(cmp.exit_code == 0);
    CHECK(cmp.output.find("| Run | Topology |") == 0);

    const Result resume = cli({"resume", "--out", (w.dir / "one").string()});
    CHECK(resume.exit_code == 0);
    CHECK(resume.output.find("0 executed") != std::string::npos);

    const Result rescore = cli({"score", "--out", (w.dir / "one").string(), "--scorer", "exact"});
    CHECK(rescore.exit_code == 0);
}

TEST_CASE("failed episodes give exit code 2") {
    Workspace w(true);
    const Result run = cli(w.run_args("out"));
    INFO(run.output);
    CHECK(run.exit_code == 2);
    CHECK(run.output.find("1 failed") != std::string::npos);
}

TEST_CASE("fatal errors give exit code 1") {
    Workspace w;
    auto args = w.run_args("bad");
    args.push_back("--concurrency");
    args.push_back("0");
    const Result bad = cli(args);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("topoclinic: ConfigError") != std::string::npos);

    REQUIRE(cli(w.run_args("ok")).exit_code == 0);
    const Result mismatch = cli({"resume", "--out", (w.dir / "ok").string(), "--model", "something-else"});
    CHECK(mismatch.exit_code == 1);
    CHECK(mismatch.output.find("MetadataMismatch") != std::string::npos);

    const Result incomplete = cli({"report", "--out", (w.dir / "missing").string()});
    CHECK(incomplete.exit_code == 1);
    CHECK(incomplete.output.find("IncompleteArtifacts") != std::string::npos);
}

TEST_CASE("usage errors") {
    CHECK(cli({}).exit_code != 0);
    CHECK(cli({"run", "--dataset", "x"}).exit_code != 0);
    CHECK(cli({"compare", "only-one"}).exit_code != 0);
    CHECK(cli({"--version"}).output.find("0.1.0") != std::string::npos);
}
