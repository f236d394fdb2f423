#pragma once

// Fixture files for tests that link only the shared library or drive the CLI.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace plain {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("topoclinic-plain-" + std::to_string(rd()) + "-" + std::to_string(counter++));
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

struct PlainCase {
    std::string id;
    std::string category;
    std::string truth;
};

inline std::string token(const std::string& id) { return "[case-token:" + id + "]"; }

inline void write_cases(const fs::path& path, const std::vector<PlainCase>& cases) {
    json out = json::array();
    for (const auto& c : cases) {
        out.push_back({{"id", c.id},
                       {"category", c.category},
                       {"presentation", "Patient presents with findings. " + token(c.id)},
                       {"ground_truth", c.truth}});
    }
    write_text(path, out.dump(2));
}

/// Final answers per case, keyed "control", "hierarchical", "adversarial",
/// "collaborative". A missing entry answers "Unknown Condition"; an empty
/// string answers without the marker line.
using Answers = std::map<std::string, std::map<std::string, std::string>>;

inline json script_for(const Answers& answers, bool with_adjudicator = false) {
    json out = json::array();
    auto add = [&](std::vector<std::string> match, const std::string& id, std::string response) {
        match.push_back(token(id));
        out.push_back({{"match", match}, {"response", std::move(response)}, {"repeat", true}});
    };
    for (const auto& [id, finals] : answers) {
        auto final_line = [&](const char* topology) {
            auto it = finals.find(topology);
            if (it == finals.end()) return std::string("Reasoned.\nFINAL DIAGNOSIS: Unknown Condition");
            if (it->second.empty()) return std::string("I am not sure.");
            return "Reasoned.\nFINAL DIAGNOSIS: " + it->second;
        };
        const std::string hier = finals.count("hierarchical") ? finals.at("hierarchical") : "Unknown Condition";
        add({"Expert Medical Diagnostician"}, id, final_line("control"));
        add({"Resident physician"}, id, "1. Alpha\n2. Beta\n3. Gamma");
        add({"Senior Resident supervising"}, id, "SHORTLIST: " + hier + "; Beta");
        add({"Attending Physician"}, id, final_line("hierarchical"));
        add({"Write a rebuttal"}, id, "REBUTTAL");
        add({"Proposer in a structured", "Propose the single"}, id, "PROPOSAL");
        add({"Critic in a structured"}, id, "CRITIQUE");
        add({"Judge of a structured"}, id, final_line("adversarial"));
        add({"You are a Pathologist"}, id, "PATHOLOGY");
        add({"You are an Internist"}, id, "INTERNAL");
        add({"You are a Radiologist"}, id, "RADIOLOGY");
        add({"Chairman of a multidisciplinary"}, id, final_line("collaborative"));
    }
    if (with_adjudicator) {
        out.push_back({{"match", json::array({"Medical Adjudicator"})},
                       {"response", "Matches.\nSCORE: 10"},
                       {"repeat", true}});
    }
    return out;
}

}  // namespace plain
