#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "topoclinic/corpus.hpp"
#include "topoclinic/provider.hpp"
#include "topoclinic/topology.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("topoclinic-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline topoclinic::CaseRecord make_case(std::string id, std::string category, std::string truth) {
    topoclinic::CaseRecord r;
    r.presentation = "Patient " + id + " presents with findings. [case-token:" + id + "]";
    r.id = std::move(id);
    r.category = std::move(category);
    r.ground_truth = std::move(truth);
    return r;
}

inline std::string case_token(const std::string& id) { return "[case-token:" + id + "]"; }

inline void write_corpus(const fs::path& path, const std::vector<topoclinic::CaseRecord>& cases) {
    write_text(path, topoclinic::serialize_cases(topoclinic::CaseCorpus(cases)));
}

/// Substrings that identify each stage's rendered prompt.
inline const std::map<std::string, std::vector<std::string>>& stage_markers() {
    static const std::map<std::string, std::vector<std::string>> kMarkers = {
        {"control", {"Expert Medical Diagnostician"}},
        {"resident", {"Resident physician"}},
        {"senior_resident", {"Senior Resident supervising"}},
        {"attending", {"Attending Physician"}},
        {"proposer", {"Proposer in a structured", "Propose the single"}},
        {"critic", {"Critic in a structured"}},
        {"rebuttal", {"Write a rebuttal"}},
        {"judge", {"Judge of a structured"}},
        {"pathologist", {"You are a Pathologist"}},
        {"internist", {"You are an Internist"}},
        {"radiologist", {"You are a Radiologist"}},
        {"chairman", {"Chairman of a multidisciplinary"}},
        {"adjudicator", {"Medical Adjudicator"}},
    };
    return kMarkers;
}

inline topoclinic::ScriptEntry stage_entry(const std::string& stage, const std::string& case_id,
                                           std::string response) {
    topoclinic::ScriptEntry e;
    e.match_all = stage_markers().at(stage);
    e.match_all.push_back(case_token(case_id));
    e.response = std::move(response);
    e.repeat = true;
    return e;
}

/// Per-case final answers by topology; intermediate stages get sentinel text.
struct CaseAnswers {
    std::string id;
    std::map<topoclinic::Topology, std::string> final_answer;
};

/// Script answering every stage of every topology for the given cases. All
/// entries repeat, so completion order and reruns do not matter.
inline std::vector<topoclinic::ScriptEntry> full_script(const std::vector<CaseAnswers>& answers) {
    using topoclinic::Topology;
    std::vector<topoclinic::ScriptEntry> script;
    for (const auto& a : answers) {
        auto final_for = [&](Topology t) {
            auto it = a.final_answer.find(t);
            return it != a.final_answer.end() ? it->second : std::string("Unknown Condition");
        };
        const std::string& id = a.id;
        script.push_back(stage_entry("control", id, "Direct call.\nFINAL DIAGNOSIS: " + final_for(Topology::kControl)));
        script.push_back(stage_entry("resident", id, "1. Alpha " + id + "\n2. Beta " + id + "\n3. Gamma " + id));
        script.push_back(stage_entry("senior_resident", id, "Ruled out Gamma.\nSHORTLIST: " +
                                                                final_for(Topology::kHierarchical) + "; Beta " + id));
        script.push_back(stage_entry("attending", id, "Agree.\nFINAL DIAGNOSIS: " + final_for(Topology::kHierarchical)));
        script.push_back(stage_entry("rebuttal", id, "REBUTTAL-" + id));
        script.push_back(stage_entry("proposer", id, "PROPOSAL-" + id));
        script.push_back(stage_entry("critic", id, "CRITIQUE-" + id));
        script.push_back(stage_entry("judge", id, "Weighed.\nFINAL DIAGNOSIS: " + final_for(Topology::kAdversarial)));
        script.push_back(stage_entry("pathologist", id, "PATHOLOGY-" + id));
        script.push_back(stage_entry("internist", id, "INTERNAL-" + id));
        script.push_back(stage_entry("radiologist", id, "RADIOLOGY-" + id));
        script.push_back(stage_entry("chairman", id, "Consensus.\nFINAL DIAGNOSIS: " + final_for(Topology::kCollaborative)));
    }
    return script;
}

inline json script_to_json(const std::vector<topoclinic::ScriptEntry>& script) {
    json out = json::array();
    for (const auto& e : script) {
        json item{{"response", e.response}};
        item["match"] = e.match_all.empty() ? json("*") : json(e.match_all);
        if (e.repeat) item["repeat"] = true;
        out.push_back(item);
    }
    return out;
}

/// Provider double with a hand-written behaviour per call.
class FunctionProvider : public topoclinic::Provider {
public:
    using Fn = std::function<topoclinic::ChatResponse(const topoclinic::ChatRequest&, int call)>;
    explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}

    topoclinic::ChatResponse complete(const topoclinic::ChatRequest& request) override {
        return fn_(request, calls_++);
    }
    int calls() const { return calls_.load(); }

private:
    Fn fn_;
    std::atomic<int> calls_{0};
};

inline topoclinic::ChatResponse reply(std::string content) {
    topoclinic::ChatResponse r;
    r.content = std::move(content);
    r.usage = {3, 2};
    r.provider_tag = topoclinic::ProviderTag::kLive;
    return r;
}

/// Wraps a provider and sleeps a random few milliseconds per call, to shake
/// up completion order.
class JitterProvider : public topoclinic::Provider {
public:
    JitterProvider(std::shared_ptr<topoclinic::Provider> inner, unsigned seed)
        : inner_(std::move(inner)), rng_(seed) {}

    topoclinic::ChatResponse complete(const topoclinic::ChatRequest& request) override {
        int ms;
        {
            std::lock_guard lock(mutex_);
            ms = std::uniform_int_distribution<int>(0, 4)(rng_);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        return inner_->complete(request);
    }

private:
    std::shared_ptr<topoclinic::Provider> inner_;
    std::mutex mutex_;
    std::mt19937 rng_;
};

}  // namespace testsupport
