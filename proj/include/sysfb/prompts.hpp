#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sysfb/data_model.hpp"

namespace sysfb {

enum class PromptName {
    query_refine,
    response_refine,
    response_refine_with_feedback,
    judge_specificity,
    judge_factuality,
    judge_helpfulness,
    judge_relevance,
    feedback_generate,
};

std::string_view to_string(PromptName name);
PromptName parse_prompt_name(std::string_view name);

/// Placeholder name → value. Placeholders appear in bodies as [[NAME]].
using Slots = std::map<std::string, std::string, std::less<>>;

namespace slot {
inline constexpr std::string_view criteria = "CRITERIA";
inline constexpr std::string_view dialog_context = "DIALOG_CONTEXT";
inline constexpr std::string_view original_query = "ORIGINAL_QUERY";
inline constexpr std::string_view original_response = "ORIGINAL_RESPONSE";
inline constexpr std::string_view search_documents = "SEARCH_DOCUMENTS";
inline constexpr std::string_view feedback = "FEEDBACK";
inline constexpr std::string_view query = "QUERY";
inline constexpr std::string_view response = "RESPONSE";
}  // namespace slot

struct PromptTemplate {
    PromptName name;
    std::string_view body;

    static const PromptTemplate& get(PromptName name);
    /// Distinct placeholder names in order of first appearance.
    std::vector<std::string> placeholders() const;
};

/// Substitutes every [[NAME]] in one pass; substituted text is not rescanned.
/// For query_refine an absent or empty CRITERIA slot selects the baseline
/// variant: the requirements sentence and the criteria line are dropped.
/// Throws RenderError naming the first missing placeholder.
std::string render(const PromptTemplate& tmpl, const Slots& slots);
std::string render(PromptName name, const Slots& slots);

/// "User: ..." / "Bot: ..." one line per turn.
std::string serialize_dialog(const DialogContext& context);
/// One line per document: "<title>: <content>" (just content when untitled).
std::string serialize_documents(const std::vector<SearchDocument>& documents);
/// "(1) first (2) second ..."; empty string for an empty list.
std::string format_criteria(const std::vector<std::string>& criteria);

/// Refinement prompt for a record: query_refine for queries; for responses
/// response_refine, or response_refine_with_feedback when `feedback` is set.
std::string refinement_prompt(const FeedbackRecord& record, const CriteriaSet& criteria,
                              const std::optional<std::string>& feedback = std::nullopt);

}  // namespace sysfb
