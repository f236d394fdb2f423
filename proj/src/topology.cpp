#include "topoclinic/topology.hpp"

#include <algorithm>

#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"

namespace topoclinic {

using json = nlohmann::json;

std::string_view topology_name(Topology topology) {
    switch (topology) {
        case Topology::kControl: return "control";
        case Topology::kHierarchical: return "hierarchical";
        case Topology::kAdversarial: return "adversarial";
        case Topology::kCollaborative: return "collaborative";
    }
    return "control";
}

Topology parse_topology(std::string_view name) {
    for (Topology t : kAllTopologies) {
        if (topology_name(t) == name) return t;
    }
    throw Error(ErrorCode::kConfig, "unknown topology '" + std::string(name) + "'");
}

std::vector<Topology> parse_topology_list(std::string_view csv) {
    std::vector<bool> wanted(kAllTopologies.size(), false);
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        auto comma = csv.find(',', pos);
        if (comma == std::string_view::npos) comma = csv.size();
        const auto item = trim(csv.substr(pos, comma - pos));
        if (!item.empty()) {
            wanted[static_cast<std::size_t>(parse_topology(item))] = true;
        }
        pos = comma + 1;
    }
    std::vector<Topology> out;
    for (Topology t : kAllTopologies) {
        if (wanted[static_cast<std::size_t>(t)]) out.push_back(t);
    }
    return out;
}

std::size_t expected_turns(Topology topology) {
    switch (topology) {
        case Topology::kControl: return 1;
        case Topology::kHierarchical: return 3;
        case Topology::kAdversarial: return 4;
        case Topology::kCollaborative: return 4;
    }
    return 0;
}

namespace {

constexpr std::array<std::pair<AgentRole, std::string_view>, 11> kRoleNames = {{
    {AgentRole::kDiagnostician, "diagnostician"},
    {AgentRole::kResident, "resident"},
    {AgentRole::kSeniorResident, "senior_resident"},
    {AgentRole::kAttending, "attending"},
    {AgentRole::kProposer, "proposer"},
    {AgentRole::kCritic, "critic"},
    {AgentRole::kJudge, "judge"},
    {AgentRole::kPathologist, "pathologist"},
    {AgentRole::kInternist, "internist"},
    {AgentRole::kRadiologist, "radiologist"},
    {AgentRole::kChairman, "chairman"},
}};

}  // namespace

std::string_view agent_role_name(AgentRole role) {
    for (const auto& [r, name] : kRoleNames) {
        if (r == role) return name;
    }
    return "diagnostician";
}

AgentRole parse_agent_role(std::string_view name) {
    for (const auto& [r, n] : kRoleNames) {
        if (n == name) return r;
    }
    throw Error(ErrorCode::kParse, "unknown agent role '" + std::string(name) + "'");
}

json to_json(const AgentTurn& turn) {
    return json{{"seq", turn.seq},
                {"agent_role", agent_role_name(turn.agent_role)},
                {"prompt", turn.prompt},
                {"response", turn.response},
                {"usage",
                 {{"prompt_tokens", turn.usage.prompt_tokens},
                  {"completion_tokens", turn.usage.completion_tokens}}},
                {"provider_tag", provider_tag_name(turn.provider_tag)}};
}

json to_json(const EpisodeResult& result) {
    json transcript = json::array();
    for (const auto& turn : result.transcript) transcript.push_back(to_json(turn));
    json j{{"case_id", result.case_id},
           {"topology", topology_name(result.topology)},
           {"status", result.ok() ? "ok" : "failed"},
           {"final", result.final},
           {"final_diagnosis", result.final_diagnosis},
           {"marker_retries", result.marker_retries},
           {"usage",
            {{"prompt_tokens", result.usage_total.prompt_tokens},
             {"completion_tokens", result.usage_total.completion_tokens}}},
           {"transcript", std::move(transcript)}};
    if (!result.ok()) j["failure_reason"] = result.failure_reason;
    if (result.deviated_from_shortlist) j["deviated_from_shortlist"] = *result.deviated_from_shortlist;
    return j;
}

EpisodeResult episode_from_json(const json& j) {
    try {
        EpisodeResult result;
        result.case_id = j.at("case_id").get<std::string>();
        result.topology = parse_topology(j.at("topology").get<std::string>());
        const auto status = j.at("status").get<std::string>();
        if (status != "ok" && status != "failed") {
            throw Error(ErrorCode::kParse, "unknown episode status '" + status + "'");
        }
        result.status = status == "ok" ? EpisodeStatus::kOk : EpisodeStatus::kFailed;
        result.final = j.value("final", true);
        result.final_diagnosis = j.at("final_diagnosis").get<std::string>();
        result.marker_retries = j.value("marker_retries", 0);
        result.usage_total.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::int64_t>();
        result.usage_total.completion_tokens =
            j.at("usage").at("completion_tokens").get<std::int64_t>();
        result.failure_reason = j.value("failure_reason", std::string());
        if (auto it = j.find("deviated_from_shortlist"); it != j.end()) {
            result.deviated_from_shortlist = it->get<bool>();
        }
        for (const auto& t : j.at("transcript")) {
            AgentTurn turn;
            turn.seq = t.at("seq").get<int>();
            turn.agent_role = parse_agent_role(t.at("agent_role").get<std::string>());
            turn.prompt = t.at("prompt").get<std::string>();
            turn.response = t.at("response").get<std::string>();
            turn.usage.prompt_tokens = t.at("usage").at("prompt_tokens").get<std::int64_t>();
            turn.usage.completion_tokens = t.at("usage").at("completion_tokens").get<std::int64_t>();
            turn.provider_tag = parse_provider_tag(t.at("provider_tag").get<std::string>());
            result.transcript.push_back(std::move(turn));
        }
        return result;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("episode record: ") + e.what());
    }
}

}  // namespace topoclinic
