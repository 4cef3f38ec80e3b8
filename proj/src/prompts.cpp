#include "sysfb/prompts.hpp"

#include <algorithm>
#include <array>

#include "sysfb/errors.hpp"

namespace sysfb {
namespace detail {
const std::map<std::string, std::string_view, std::less<>>& prompt_assets();
}  // namespace detail

namespace {

constexpr std::array<std::pair<PromptName, std::string_view>, 8> kNames{{
    {PromptName::query_refine, "query_refine"},
    {PromptName::response_refine, "response_refine"},
    {PromptName::response_refine_with_feedback, "response_refine_with_feedback"},
    {PromptName::judge_specificity, "judge_specificity"},
    {PromptName::judge_factuality, "judge_factuality"},
    {PromptName::judge_helpfulness, "judge_helpfulness"},
    {PromptName::judge_relevance, "judge_relevance"},
    {PromptName::feedback_generate, "feedback_generate"},
}};

constexpr std::string_view kRequirementsSentence = " You should follow the following requirements:\n[[CRITERIA]]";

}  // namespace

std::string_view to_string(PromptName name) {
    for (const auto& [n, s] : kNames) {
        if (n == name) return s;
    }
    return "query_refine";
}

PromptName parse_prompt_name(std::string_view name) {
    for (const auto& [n, s] : kNames) {
        if (s == name) return n;
    }
    throw ValidationError("unknown prompt template \"" + std::string(name) + "\"");
}

const PromptTemplate& PromptTemplate::get(PromptName name) {
    static const auto templates = [] {
        std::map<PromptName, PromptTemplate> all;
        const auto& assets = detail::prompt_assets();
        for (const auto& [n, s] : kNames) {
            auto it = assets.find(s);
            if (it == assets.end()) throw Error("prompt asset missing: " + std::string(s));
            all.emplace(n, PromptTemplate{n, it->second});
        }
        return all;
    }();
    return templates.at(name);
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> out;
    for (std::size_t pos = body.find("[["); pos != std::string_view::npos; pos = body.find("[[", pos + 2)) {
        const auto end = body.find("]]", pos + 2);
        if (end == std::string_view::npos) break;
        std::string name(body.substr(pos + 2, end - pos - 2));
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
    }
    return out;
}

std::string render(const PromptTemplate& tmpl, const Slots& slots) {
    std::string body(tmpl.body);
    if (tmpl.name == PromptName::query_refine) {
        auto it = slots.find(slot::criteria);
        if (it == slots.end() || it->second.empty()) {
            const auto pos = body.find(kRequirementsSentence);
            if (pos != std::string::npos) body.erase(pos, kRequirementsSentence.size());
        }
    }
    std::string out;
    out.reserve(body.size() + 256);
    std::size_t cursor = 0;
    while (true) {
        const auto open = body.find("[[", cursor);
        if (open == std::string::npos) break;
        const auto close = body.find("]]", open + 2);
        if (close == std::string::npos) break;
        const std::string_view name(body.data() + open + 2, close - open - 2);
        auto it = slots.find(name);
        if (it == slots.end()) throw RenderError(std::string(name));
        out.append(body, cursor, open - cursor);
        out.append(it->second);
        cursor = close + 2;
    }
    out.append(body, cursor, std::string::npos);
    return out;
}

std::string render(PromptName name, const Slots& slots) { return render(PromptTemplate::get(name), slots); }

std::string serialize_dialog(const DialogContext& context) {
    std::string out;
    for (std::size_t i = 0; i < context.turns.size(); ++i) {
        if (i) out.push_back('\n');
        const auto& t = context.turns[i];
        out += t.speaker == Speaker::user ? "User: " : "Bot: ";
        out += t.text;
    }
    return out;
}

std::string serialize_documents(const std::vector<SearchDocument>& documents) {
    std::string out;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (i) out.push_back('\n');
        const auto& d = documents[i];
        if (!d.title.empty()) out += d.title + ": ";
        out += d.content;
    }
    return out;
}

std::string format_criteria(const std::vector<std::string>& criteria) {
    std::string out;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (i) out.push_back(' ');
        out += "(" + std::to_string(i + 1) + ") " + criteria[i];
    }
    return out;
}

std::string refinement_prompt(const FeedbackRecord& record, const CriteriaSet& criteria,
                              const std::optional<std::string>& feedback) {
    Slots slots;
    slots.emplace(slot::dialog_context, serialize_dialog(record.context));
    if (!criteria.criteria.empty()) slots.emplace(slot::criteria, format_criteria(criteria.criteria));
    if (record.target_kind == TargetKind::query) {
        slots.emplace(slot::original_query, record.original_text);
        return render(PromptName::query_refine, slots);
    }
    slots.emplace(slot::original_response, record.original_text);
    slots.emplace(slot::search_documents,
                  record.search_documents ? serialize_documents(*record.search_documents) : std::string());
    if (feedback) {
        slots.emplace(slot::feedback, *feedback);
        return render(PromptName::response_refine_with_feedback, slots);
    }
    return render(PromptName::response_refine, slots);
}

}  // namespace sysfb
