#include "topoclinic/templates.hpp"

#include <spdlog/spdlog.h>

#include <nlohmann/json.hpp>

#include "builtin_templates.hpp"
#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"
#include "topoclinic/hash.hpp"

namespace topoclinic {

namespace {

bool identifier_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls on_literal / on_placeholder for each segment of `text`.
template <typename Literal, typename Placeholder>
void scan(std::string_view text, Literal on_literal, Placeholder on_placeholder) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find('{', pos);
        if (open == std::string_view::npos) break;
        auto close = open + 1;
        while (close < text.size() && identifier_char(text[close])) ++close;
        if (close < text.size() && text[close] == '}' && close > open + 1) {
            on_literal(text.substr(pos, open - pos));
            on_placeholder(text.substr(open + 1, close - open - 1));
            pos = close + 1;
        } else {
            on_literal(text.substr(pos, open + 1 - pos));
            pos = open + 1;
        }
    }
    on_literal(text.substr(std::min(pos, text.size())));
}

constexpr std::string_view kFinalMarker = "FINAL DIAGNOSIS:";
constexpr std::string_view kScoreMarker = "SCORE:";

}  // namespace

std::string render_prompt(std::string_view text, const Bindings& bindings) {
    std::string out;
    out.reserve(text.size());
    scan(
        text, [&](std::string_view literal) { out.append(literal); },
        [&](std::string_view name) {
            auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw Error(ErrorCode::kMissingBinding, std::string(name));
            }
            out.append(it->second);
        });
    return out;
}

std::set<std::string> placeholders(std::string_view text) {
    std::set<std::string> names;
    scan(
        text, [](std::string_view) {}, [&](std::string_view name) { names.emplace(name); });
    return names;
}

PromptTemplate parse_template(std::string name, std::string_view text) {
    constexpr std::string_view kSystem = "[system]\n";
    constexpr std::string_view kUser = "\n[user]\n";
    if (!text.starts_with(kSystem)) {
        throw Error(ErrorCode::kParse, "template " + name + ": must start with a [system] line");
    }
    const auto split = text.find(kUser);
    if (split == std::string_view::npos) {
        throw Error(ErrorCode::kParse, "template " + name + ": missing [user] line");
    }
    PromptTemplate tmpl;
    tmpl.name = std::move(name);
    tmpl.system = std::string(trim(text.substr(kSystem.size(), split - kSystem.size())));
    tmpl.user = std::string(trim(text.substr(split + kUser.size())));
    return tmpl;
}

const std::map<std::string, std::set<std::string>, std::less<>>& TemplateSet::stage_bindings() {
    static const std::map<std::string, std::set<std::string>, std::less<>> kStages = {
        {"control", {"case"}},
        {"resident", {"case"}},
        {"senior_resident", {"case", "candidates"}},
        {"attending", {"case", "shortlist"}},
        {"proposer", {"case"}},
        {"critic", {"case", "proposal"}},
        {"rebuttal", {"case", "proposal", "critique"}},
        {"judge", {"case", "proposal", "critique", "rebuttal"}},
        {"pathologist", {"case"}},
        {"internist", {"case"}},
        {"radiologist", {"case"}},
        {"chairman", {"case", "opinions"}},
        {"adjudicator", {"prediction", "truth"}},
    };
    return kStages;
}

TemplateSet::TemplateSet(std::map<std::string, PromptTemplate, std::less<>> templates,
                         std::string version)
    : templates_(std::move(templates)), version_(std::move(version)) {
    validate();
}

void TemplateSet::validate() const {
    static const std::set<std::string, std::less<>> kFinalStages = {"control", "attending",
                                                                    "judge", "chairman"};
    for (const auto& [stage, bound] : stage_bindings()) {
        auto it = templates_.find(stage);
        if (it == templates_.end()) {
            throw Error(ErrorCode::kConfig, "missing template for stage " + stage);
        }
        const PromptTemplate& tmpl = it->second;
        if (tmpl.system.empty() || tmpl.user.empty()) {
            throw Error(ErrorCode::kConfig, "template " + stage + " has an empty section");
        }
        auto used = placeholders(tmpl.user);
        used.merge(placeholders(tmpl.system));
        for (const auto& name : used) {
            if (!bound.contains(name)) {
                throw Error(ErrorCode::kConfig,
                            "template " + stage + " uses unknown placeholder {" + name + "}");
            }
        }
        for (const auto& name : bound) {
            if (!used.contains(name)) {
                throw Error(ErrorCode::kConfig,
                            "template " + stage + " never references {" + name + "}");
            }
        }
        const std::string whole = tmpl.system + "\n" + tmpl.user;
        if (kFinalStages.contains(stage) && whole.find(kFinalMarker) == std::string::npos) {
            throw Error(ErrorCode::kConfig,
                        "final-stage template " + stage + " must instruct the FINAL DIAGNOSIS: marker");
        }
        if (stage == "adjudicator" && whole.find(kScoreMarker) == std::string::npos) {
            throw Error(ErrorCode::kConfig, "adjudicator template must instruct the SCORE: marker");
        }
    }
}

TemplateSet TemplateSet::builtin() {
    std::map<std::string, PromptTemplate, std::less<>> templates;
    for (const auto& [name, text] : detail::builtin_template_files()) {
        templates.emplace(name, parse_template(std::string(name), text));
    }
    return TemplateSet(std::move(templates), std::string(trim(detail::builtin_template_version())));
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorCode::kConfig, "templates dir not found: " + dir.string());
    }
    TemplateSet base = builtin();
    auto templates = base.templates_;
    std::string version = "custom";
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto& path = entry.path();
        if (path.filename() == "VERSION") {
            version = std::string(trim(read_file(path)));
            continue;
        }
        if (path.extension() != ".txt") continue;
        const std::string stage = path.stem().string();
        if (!stage_bindings().contains(stage)) {
            spdlog::warn("ignoring template {} (no such stage)", path.string());
            continue;
        }
        templates[stage] = parse_template(stage, read_file(path));
    }
    return TemplateSet(std::move(templates), std::move(version));
}

const PromptTemplate& TemplateSet::at(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw Error(ErrorCode::kConfig, "no template named " + std::string(name));
    }
    return it->second;
}

std::map<std::string, std::string> TemplateSet::per_template_hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, tmpl] : templates_) {
        out[name] = sha256_hex(nlohmann::json{{"system", tmpl.system}, {"user", tmpl.user}}.dump());
    }
    return out;
}

std::string TemplateSet::hash() const { return sha256_hex(nlohmann::json(per_template_hashes()).dump()); }

}  // namespace topoclinic
