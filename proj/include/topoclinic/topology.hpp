#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "topoclinic/provider.hpp"

namespace topoclinic {

enum class Topology { kControl, kHierarchical, kAdversarial, kCollaborative };

/// Fixed reporting and file order.
inline constexpr std::array kAllTopologies = {Topology::kControl, Topology::kHierarchical,
                                              Topology::kAdversarial, Topology::kCollaborative};

std::string_view topology_name(Topology topology);
Topology parse_topology(std::string_view name);
/// Comma-separated list, returned in canonical order without duplicates.
std::vector<Topology> parse_topology_list(std::string_view csv);

/// Agent turns each topology issues on a successful episode.
std::size_t expected_turns(Topology topology);

enum class AgentRole {
    kDiagnostician,
    kResident,
    kSeniorResident,
    kAttending,
    kProposer,
    kCritic,
    kJudge,
    kPathologist,
    kInternist,
    kRadiologist,
    kChairman,
};

std::string_view agent_role_name(AgentRole role);
AgentRole parse_agent_role(std::string_view name);

struct AgentTurn {
    int seq = 0;
    AgentRole agent_role = AgentRole::kDiagnostician;
    std::string prompt;
    std::string response;
    TokenUsage usage;
    ProviderTag provider_tag = ProviderTag::kScripted;

    bool operator==(const AgentTurn&) const = default;
};

enum class EpisodeStatus { kOk, kFailed };

struct EpisodeResult {
    std::string case_id;
    Topology topology = Topology::kControl;
    std::vector<AgentTurn> transcript;
    std::string final_diagnosis;
    TokenUsage usage_total;
    EpisodeStatus status = EpisodeStatus::kOk;
    std::string failure_reason;
    /// False only for failures a later resume should retry (transport, rate limit).
    bool final = true;
    int marker_retries = 0;
    /// Hierarchical only: the final pick did not keyword-match the shortlist.
    std::optional<bool> deviated_from_shortlist;

    bool ok() const { return status == EpisodeStatus::kOk; }
    bool operator==(const EpisodeResult&) const = default;
};

nlohmann::json to_json(const AgentTurn& turn);
nlohmann::json to_json(const EpisodeResult& result);
EpisodeResult episode_from_json(const nlohmann::json& j);

}  // namespace topoclinic
