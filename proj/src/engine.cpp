#include "topoclinic/engine.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <future>

#include "topoclinic/adjudication.hpp"
#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"

namespace topoclinic {

namespace {

constexpr std::string_view kMarkerReminder =
    "\n\nReminder: your answer must end with one line in exactly this format:\n"
    "FINAL DIAGNOSIS: <diagnosis>";

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view strip_emphasis(std::string_view s) {
    constexpr std::string_view kStrip = "*_ \t\r";
    const auto first = s.find_first_not_of(kStrip);
    if (first == std::string_view::npos) return {};
    return s.substr(first, s.find_last_not_of(kStrip) - first + 1);
}

}  // namespace

std::string extract_final_diagnosis(std::string_view response) {
    const std::string marker = lower(kFinalDiagnosisMarker);
    std::optional<std::string_view> found;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        auto end = response.find('\n', pos);
        if (end == std::string_view::npos) end = response.size();
        const auto line = response.substr(pos, end - pos);
        const auto at = lower(line).rfind(marker);
        if (at != std::string::npos) {
            found = line.substr(at + marker.size());
        }
        pos = end + 1;
    }
    if (!found) {
        throw Error(ErrorCode::kMissingMarker, "response has no FINAL DIAGNOSIS: line");
    }
    const auto diagnosis = strip_emphasis(*found);
    if (diagnosis.empty()) {
        throw Error(ErrorCode::kMissingMarker, "FINAL DIAGNOSIS: line is empty");
    }
    return std::string(diagnosis);
}

/// Mutable state of one in-flight episode.
class TopologyEngine::Episode {
public:
    Episode(const TopologyEngine& engine, const CaseRecord& record, Topology topology)
        : engine_(engine) {
        result_.case_id = record.id;
        result_.topology = topology;
    }

    /// One provider call; throws on provider failure. Never mutates the episode.
    AgentTurn invoke(AgentRole role, std::string_view stage, const Bindings& bindings,
                     std::string_view suffix = {}) const {
        const PromptTemplate& tmpl = engine_.templates_.at(stage);
        ChatRequest request;
        request.model = engine_.options_.model;
        request.temperature = engine_.options_.temperature;
        request.max_tokens = engine_.options_.max_tokens;
        request.messages.push_back({ChatRole::kSystem, render_prompt(tmpl.system, bindings)});
        request.messages.push_back(
            {ChatRole::kUser, render_prompt(tmpl.user, bindings) + std::string(suffix)});
        ChatResponse response = engine_.provider_->complete(request);
        if (trim(response.content).empty()) {
            throw Error(ErrorCode::kEmptyCompletion, std::string(stage) + " returned empty content");
        }
        AgentTurn turn;
        turn.agent_role = role;
        turn.prompt = request.rendered_prompt();
        turn.response = std::move(response.content);
        turn.usage = response.usage;
        turn.provider_tag = response.provider_tag;
        return turn;
    }

    void record(AgentTurn turn) {
        turn.seq = static_cast<int>(result_.transcript.size());
        result_.usage_total += turn.usage;
        result_.transcript.push_back(std::move(turn));
    }

    void fail(const std::exception_ptr& error) {
        result_.status = EpisodeStatus::kFailed;
        result_.final_diagnosis.clear();
        try {
            std::rethrow_exception(error);
        } catch (const Error& e) {
            result_.failure_reason = std::string(error_code_name(e.code())) + ": " + e.what();
            result_.final = !e.transient();
        } catch (const std::exception& e) {
            result_.failure_reason = std::string("InternalError: ") + e.what();
            result_.final = true;
        }
    }

    /// Intermediate stage. Returns nullopt after recording the failure.
    std::optional<std::string> ask(AgentRole role, std::string_view stage,
                                   const Bindings& bindings) {
        try {
            AgentTurn turn = invoke(role, stage, bindings);
            std::string response = turn.response;
            record(std::move(turn));
            return response;
        } catch (...) {
            fail(std::current_exception());
            return std::nullopt;
        }
    }

    /// Final stage: extracts the marker, re-asking once with a reminder.
    void conclude(AgentRole role, std::string_view stage, const Bindings& bindings) {
        try {
            record(invoke(role, stage, bindings));
            try {
                result_.final_diagnosis = extract_final_diagnosis(result_.transcript.back().response);
                return;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::kMissingMarker) throw;
            }
            ++result_.marker_retries;
            AgentTurn retry = invoke(role, stage, bindings, kMarkerReminder);
            retry.seq = result_.transcript.back().seq;
            result_.usage_total += retry.usage;
            result_.transcript.back() = std::move(retry);
            result_.final_diagnosis = extract_final_diagnosis(result_.transcript.back().response);
        } catch (...) {
            fail(std::current_exception());
        }
    }

    bool failed() const { return !result_.ok(); }
    EpisodeResult& result() { return result_; }

private:
    const TopologyEngine& engine_;
    EpisodeResult result_;
};

TopologyEngine::TopologyEngine(std::shared_ptr<Provider> provider, TemplateSet templates,
                               EngineOptions options)
    : provider_(std::move(provider)), templates_(std::move(templates)), options_(std::move(options)) {
    if (!provider_) {
        throw Error(ErrorCode::kInvalidArgument, "engine needs a provider");
    }
}

EpisodeResult TopologyEngine::run(const CaseRecord& record, Topology topology) const {
    switch (topology) {
        case Topology::kControl: return run_control(record);
        case Topology::kHierarchical: return run_hierarchical(record);
        case Topology::kAdversarial: return run_adversarial(record);
        case Topology::kCollaborative: return run_collaborative(record);
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown topology");
}

EpisodeResult TopologyEngine::run_control(const CaseRecord& record) const {
    Episode episode(*this, record, Topology::kControl);
    episode.conclude(AgentRole::kDiagnostician, "control", {{"case", record.presentation}});
    return std::move(episode.result());
}

EpisodeResult TopologyEngine::run_hierarchical(const CaseRecord& record) const {
    Episode episode(*this, record, Topology::kHierarchical);
    const auto candidates =
        episode.ask(AgentRole::kResident, "resident", {{"case", record.presentation}});
    if (!candidates) return std::move(episode.result());
    const auto shortlist = episode.ask(AgentRole::kSeniorResident, "senior_resident",
                                       {{"case", record.presentation}, {"candidates", *candidates}});
    if (!shortlist) return std::move(episode.result());
    episode.conclude(AgentRole::kAttending, "attending",
                     {{"case", record.presentation}, {"shortlist", *shortlist}});
    EpisodeResult& result = episode.result();
    if (result.ok()) {
        const auto pick = normalize_text(result.final_diagnosis);
        result.deviated_from_shortlist = normalize_text(*shortlist).find(pick) == std::string::npos;
    }
    return std::move(result);
}

EpisodeResult TopologyEngine::run_adversarial(const CaseRecord& record) const {
    Episode episode(*this, record, Topology::kAdversarial);
    const auto proposal =
        episode.ask(AgentRole::kProposer, "proposer", {{"case", record.presentation}});
    if (!proposal) return std::move(episode.result());
    const auto critique = episode.ask(AgentRole::kCritic, "critic",
                                      {{"case", record.presentation}, {"proposal", *proposal}});
    if (!critique) return std::move(episode.result());
    const auto rebuttal = episode.ask(
        AgentRole::kProposer, "rebuttal",
        {{"case", record.presentation}, {"proposal", *proposal}, {"critique", *critique}});
    if (!rebuttal) return std::move(episode.result());
    episode.conclude(AgentRole::kJudge, "judge",
                     {{"case", record.presentation},
                      {"proposal", *proposal},
                      {"critique", *critique},
                      {"rebuttal", *rebuttal}});
    return std::move(episode.result());
}

EpisodeResult TopologyEngine::run_collaborative(const CaseRecord& record) const {
    Episode episode(*this, record, Topology::kCollaborative);
    struct Specialist {
        AgentRole role;
        std::string_view stage;
        std::string_view heading;
    };
    static constexpr std::array<Specialist, 3> kPanel = {{
        {AgentRole::kPathologist, "pathologist", "Pathologist"},
        {AgentRole::kInternist, "internist", "Internist"},
        {AgentRole::kRadiologist, "radiologist", "Radiologist"},
    }};
    const Bindings case_only{{"case", record.presentation}};

    std::array<std::future<AgentTurn>, kPanel.size()> pending;
    for (std::size_t i = 0; i < kPanel.size(); ++i) {
        pending[i] = std::async(std::launch::async, [&episode, &case_only, i] {
            return episode.invoke(kPanel[i].role, kPanel[i].stage, case_only);
        });
    }
    // Join all three before looking at any outcome; transcript order is the
    // panel order, not completion order.
    for (auto& f : pending) f.wait();

    std::exception_ptr first_error;
    std::string opinions;
    for (std::size_t i = 0; i < kPanel.size(); ++i) {
        try {
            AgentTurn turn = pending[i].get();
            if (!opinions.empty()) opinions += "\n\n";
            opinions += std::string(kPanel[i].heading) + ":\n" + turn.response;
            episode.record(std::move(turn));
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) {
        episode.fail(first_error);
        return std::move(episode.result());
    }
    episode.conclude(AgentRole::kChairman, "chairman",
                     {{"case", record.presentation}, {"opinions", opinions}});
    return std::move(episode.result());
}

}  // namespace topoclinic
