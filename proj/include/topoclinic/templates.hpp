#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace topoclinic {

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Replaces each `{name}` placeholder with its binding, in one pass (bound
/// text is never rescanned). Braces not enclosing an identifier are literal.
/// Throws kMissingBinding naming the first unbound placeholder.
std::string render_prompt(std::string_view text, const Bindings& bindings);

/// Placeholder names referenced by `text`.
std::set<std::string> placeholders(std::string_view text);

/// One agent stage: a system instruction plus a user message.
struct PromptTemplate {
    std::string name;
    std::string system;
    std::string user;

    bool operator==(const PromptTemplate&) const = default;
};

/// Template file format: a `[system]` line, the system text, a `[user]` line,
/// then the user text.
PromptTemplate parse_template(std::string name, std::string_view text);

/// Full stage set. Construction validates that every stage template uses
/// exactly the placeholders its stage provides and that final stages carry
/// the output-marker instruction.
class TemplateSet {
public:
    /// Compiled-in defaults (the shipped templates/ directory).
    static TemplateSet builtin();

    /// Files named `<stage>.txt` override the builtin of the same name; a
    /// `VERSION` file sets the version label.
    static TemplateSet load_dir(const std::filesystem::path& dir);

    const PromptTemplate& at(std::string_view name) const;
    const std::map<std::string, PromptTemplate, std::less<>>& all() const { return templates_; }
    const std::string& version() const { return version_; }

    /// SHA-256 over every template; recorded in run metadata.
    std::string hash() const;
    std::map<std::string, std::string> per_template_hashes() const;

    /// Stage names and the placeholders each stage binds.
    static const std::map<std::string, std::set<std::string>, std::less<>>& stage_bindings();

private:
    TemplateSet(std::map<std::string, PromptTemplate, std::less<>> templates, std::string version);
    void validate() const;

    std::map<std::string, PromptTemplate, std::less<>> templates_;
    std::string version_;
};

}  // namespace topoclinic
