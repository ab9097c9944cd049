#include "autoresearch/prompt_kit.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

namespace autoresearch {

namespace {

constexpr std::array<std::pair<TemplateId, std::string_view>, 8> kTemplateNames{{
    {TemplateId::HypCandidates, "HYP_CANDIDATES"},
    {TemplateId::HypSelect, "HYP_SELECT"},
    {TemplateId::HypReform, "HYP_REFORM"},
    {TemplateId::PlanDesign, "PLAN_DESIGN"},
    {TemplateId::CodeGen, "CODE_GEN"},
    {TemplateId::InstrFollow, "INSTR_FOLLOW"},
    {TemplateId::PkgInstall, "PKG_INSTALL"},
    {TemplateId::CodeRepair, "CODE_REPAIR"},
}};

bool is_identifier_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls on_slot(name, begin, end) for every marker {name} whose name is in
// the closed slot set; [begin, end) spans the braces.
template <typename F>
void scan_slots(std::string_view body, F&& on_slot) {
    std::size_t pos = 0;
    while ((pos = body.find('{', pos)) != std::string_view::npos) {
        std::size_t end = pos + 1;
        while (end < body.size() && is_identifier_char(body[end])) ++end;
        if (end < body.size() && body[end] == '}' && end > pos + 1) {
            std::string_view name = body.substr(pos + 1, end - pos - 1);
            if (is_slot_name(name)) {
                on_slot(name, pos, end + 1);
                pos = end + 1;
                continue;
            }
        }
        ++pos;
    }
}

bool blank(std::string_view text) {
    return text.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

constexpr std::string_view kHypCandidates = R"(You are a researcher working on the research problem described below.

Research problem:
{problem}

Generate several candidate hypotheses that could solve this problem. Make the candidates distinct from one another. Number each hypothesis and state it in one or two sentences.
)";

constexpr std::string_view kHypSelect = R"(Research problem:
{problem}

Hypothesis candidates:
{hypotheses}

From the candidates above, select the single hypothesis that is easiest to verify with the resources available to you. Consider what data, tools and computation its verification would require. Output the selected hypothesis in full, followed by a short explanation of why it was chosen.
)";

constexpr std::string_view kHypReform = R"(Hypothesis:
{hypothesis}

Reformulate this hypothesis into a precise representation so that it can be verified rigorously. Choose whatever form of representation you judge most appropriate for this hypothesis, define every symbol or term you introduce, and state the condition under which the hypothesis would be supported.
)";

constexpr std::string_view kPlanDesign = R"(Research problem:
{problem}

Hypothesis representation:
{representation_of_hypothesis}

Design a plan to verify this hypothesis using the easiest method available. The plan will be carried out entirely by a computer and language models, so every step must be executable by them without human involvement. Describe the steps in order, including how data is obtained, which metrics are computed, how results are analysed, and which outcome supports or refutes the hypothesis.
)";

constexpr std::string_view kCodeGen = R"(Verification plan:
{verification_plan}

Write Python code that carries out this verification plan from beginning to end, including data collection, metric definition, data analysis and reporting of the result. Output the complete code in a single ```python code block.
)";

constexpr std::string_view kInstrFollow = R"(Code:
{verification_code}

Revise the code above so that it follows these instructions:
- DO NOT include api-key in the code, as it has already been specified.
- Make the content complete. Do not end with ellipses, placeholders, or mere comments where data, values or logic are required.
- Keep everything else the code does unchanged.

Output the complete revised code in a single ```python code block.
)";

constexpr std::string_view kPkgInstall = R"(Code:
{verification_code}

Write a Python script that installs every package required to run the code above. Output only the installation script in a single ```python code block.
)";

constexpr std::string_view kCodeRepair = R"(Code:
{verification_code}

Running this code produced the following error:
{error_message}

Modify the code so that the error no longer occurs while keeping the purpose of the code unchanged. Output the complete modified code in a single ```python code block.
)";

} // namespace

std::string_view to_string(TemplateId id) {
    for (const auto& [value, name] : kTemplateNames) {
        if (value == id) return name;
    }
    return "UNKNOWN";
}

std::optional<TemplateId> template_id_from_string(std::string_view name) {
    for (const auto& [value, text] : kTemplateNames) {
        if (text == name) return value;
    }
    return std::nullopt;
}

bool is_slot_name(std::string_view name) {
    return std::find(kSlotNames.begin(), kSlotNames.end(), name) != kSlotNames.end();
}

MissingSlot::MissingSlot(std::string name)
    : Error("missing binding for slot {" + name + "}"), name_(std::move(name)) {}

UnknownSlot::UnknownSlot(std::string name)
    : Error("binding '" + name + "' is not a slot of this template"), name_(std::move(name)) {}

EmptyBinding::EmptyBinding(std::string name)
    : Error("binding for slot {" + name + "} is empty"), name_(std::move(name)) {}

PromptTemplate::PromptTemplate(TemplateId id, std::string body) : id_(id), body_(std::move(body)) {
    scan_slots(body_, [&](std::string_view name, std::size_t, std::size_t) {
        required_.emplace(name);
    });
}

std::string render(const PromptTemplate& tmpl, const SlotBindings& bindings) {
    for (const auto& [name, value] : bindings) {
        if (!tmpl.required_slots().contains(name)) throw UnknownSlot(name);
        if (blank(value)) throw EmptyBinding(name);
    }
    for (const auto& name : tmpl.required_slots()) {
        if (!bindings.contains(name)) throw MissingSlot(name);
    }

    const std::string& body = tmpl.body();
    std::string out;
    out.reserve(body.size());
    std::size_t copied = 0;
    scan_slots(body, [&](std::string_view name, std::size_t begin, std::size_t end) {
        out.append(body, copied, begin - copied);
        out.append(bindings.find(name)->second);
        copied = end;
    });
    out.append(body, copied, std::string::npos);
    return out;
}

TemplateSet default_templates() {
    TemplateSet set;
    auto add = [&](TemplateId id, std::string_view body) {
        set.emplace(id, PromptTemplate(id, std::string(body)));
    };
    add(TemplateId::HypCandidates, kHypCandidates);
    add(TemplateId::HypSelect, kHypSelect);
    add(TemplateId::HypReform, kHypReform);
    add(TemplateId::PlanDesign, kPlanDesign);
    add(TemplateId::CodeGen, kCodeGen);
    add(TemplateId::InstrFollow, kInstrFollow);
    add(TemplateId::PkgInstall, kPkgInstall);
    add(TemplateId::CodeRepair, kCodeRepair);
    return set;
}

TemplateSet load_templates(const std::filesystem::path& dir) {
    TemplateSet set;
    for (TemplateId id : kAllTemplateIds) {
        const auto path = dir / (std::string(to_string(id)) + ".prompt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw TemplateError("cannot read template file " + path.string());
        std::ostringstream body;
        body << in.rdbuf();
        if (blank(body.str())) throw TemplateError("template file " + path.string() + " is empty");
        set.emplace(id, PromptTemplate(id, body.str()));
    }
    return set;
}

void write_templates(const TemplateSet& templates, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [id, tmpl] : templates) {
        const auto path = dir / (std::string(to_string(id)) + ".prompt");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << tmpl.body();
        if (!out) throw TemplateError("cannot write template file " + path.string());
    }
}

} // namespace autoresearch
