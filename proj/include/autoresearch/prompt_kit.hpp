#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "autoresearch/types.hpp"

namespace autoresearch {

enum class TemplateId {
    HypCandidates,
    HypSelect,
    HypReform,
    PlanDesign,
    CodeGen,
    InstrFollow,
    PkgInstall,
    CodeRepair,
};

inline constexpr std::array<TemplateId, 8> kAllTemplateIds{
    TemplateId::HypCandidates, TemplateId::HypSelect, TemplateId::HypReform,
    TemplateId::PlanDesign,    TemplateId::CodeGen,   TemplateId::InstrFollow,
    TemplateId::PkgInstall,    TemplateId::CodeRepair,
};

/// "HYP_CANDIDATES", "HYP_SELECT", ...; also the template file stem.
std::string_view to_string(TemplateId id);
std::optional<TemplateId> template_id_from_string(std::string_view name);

/// The closed set of slot names a template may reference as {name}.
inline constexpr std::array<std::string_view, 7> kSlotNames{
    "problem",
    "hypotheses",
    "hypothesis",
    "representation_of_hypothesis",
    "verification_plan",
    "verification_code",
    "error_message",
};

bool is_slot_name(std::string_view name);

using SlotBindings = std::map<std::string, std::string, std::less<>>;

class MissingSlot : public Error {
public:
    explicit MissingSlot(std::string name);
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class UnknownSlot : public Error {
public:
    explicit UnknownSlot(std::string name);
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

/// A binding whose value is empty after trimming.
class EmptyBinding : public Error {
public:
    explicit EmptyBinding(std::string name);
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

/// A stage prompt. Any {name} with name in kSlotNames is a slot marker;
/// every other brace is literal text.
class PromptTemplate {
public:
    PromptTemplate(TemplateId id, std::string body);

    TemplateId id() const { return id_; }
    const std::string& body() const { return body_; }
    const std::set<std::string, std::less<>>& required_slots() const { return required_; }

private:
    TemplateId id_;
    std::string body_;
    std::set<std::string, std::less<>> required_;
};

/// Replaces every slot marker with its binding. Binding values are inserted
/// verbatim and never re-expanded.
std::string render(const PromptTemplate& tmpl, const SlotBindings& bindings);

using TemplateSet = std::map<TemplateId, PromptTemplate>;

/// The eight built-in stage templates.
TemplateSet default_templates();

/// Reads <ID>.prompt for every template id from dir. Throws TemplateError
/// when a file is missing or unreadable.
TemplateSet load_templates(const std::filesystem::path& dir);

/// Writes each template as <ID>.prompt into dir.
void write_templates(const TemplateSet& templates, const std::filesystem::path& dir);

} // namespace autoresearch
