#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "topoclinic/corpus.hpp"
#include "topoclinic/provider.hpp"
#include "topoclinic/templates.hpp"
#include "topoclinic/topology.hpp"

namespace topoclinic {

inline constexpr std::string_view kFinalDiagnosisMarker = "FINAL DIAGNOSIS:";

/// Text after the last line containing `FINAL DIAGNOSIS:` (case-insensitive),
/// trimmed of whitespace and markdown emphasis. Throws kMissingMarker.
std::string extract_final_diagnosis(std::string_view response);

struct EngineOptions {
    std::string model = "gpt-5.1";
    double temperature = 0.0;
    std::optional<std::int64_t> max_tokens;
};

/// Runs one diagnostic episode per call. Holds no mutable state, so a single
/// engine may serve many worker threads.
class TopologyEngine {
public:
    TopologyEngine(std::shared_ptr<Provider> provider, TemplateSet templates,
                   EngineOptions options = {});

    EpisodeResult run(const CaseRecord& record, Topology topology) const;

    EpisodeResult run_control(const CaseRecord& record) const;
    EpisodeResult run_hierarchical(const CaseRecord& record) const;
    EpisodeResult run_adversarial(const CaseRecord& record) const;
    EpisodeResult run_collaborative(const CaseRecord& record) const;

    const TemplateSet& templates() const { return templates_; }

private:
    class Episode;

    std::shared_ptr<Provider> provider_;
    TemplateSet templates_;
    EngineOptions options_;
};

}  // namespace topoclinic
