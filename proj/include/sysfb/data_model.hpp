#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sysfb {

using json = nlohmann::json;

enum class Speaker { user, bot };
enum class TargetKind { query, response };
enum class Provenance { satisfied, refined };
enum class Suite { query, response, feedback };

std::string_view to_string(Speaker s);
std::string_view to_string(TargetKind k);
std::string_view to_string(Provenance p);
std::string_view to_string(Suite s);
TargetKind parse_target_kind(std::string_view s);
Suite parse_suite(std::string_view s);

struct Turn {
    Speaker speaker = Speaker::user;
    std::string text;
    bool operator==(const Turn&) const = default;
};

struct DialogContext {
    std::string id;
    std::vector<Turn> turns;

    /// Text of the most recent user turn. Throws DomainError if there is none.
    const std::string& last_user_turn() const;
    bool operator==(const DialogContext&) const = default;
};

struct SearchDocument {
    std::string title;
    std::string content;
    std::optional<std::int64_t> result_page_count;
    bool operator==(const SearchDocument&) const = default;
};

struct FeedbackRecord {
    std::string id;
    DialogContext context;
    TargetKind target_kind = TargetKind::query;
    std::string original_text;
    bool satisfied = false;
    std::optional<std::string> feedback_text;
    std::optional<std::vector<SearchDocument>> search_documents;
    // Unknown top-level fields, written back untouched on save.
    json extra = json::object();

    bool operator==(const FeedbackRecord&) const = default;
};

struct CriteriaSet {
    std::string id;
    TargetKind target_kind = TargetKind::query;
    std::vector<std::string> criteria;
    std::string label;

    bool is_baseline() const { return criteria.empty(); }
    bool operator==(const CriteriaSet&) const = default;
};

struct JudgeVerdict {
    std::string reasoning;
    bool verdict = false;
    std::string raw;
    bool operator==(const JudgeVerdict&) const = default;
};

struct RefinementRecord {
    std::string source;
    std::string criteria_id;
    std::optional<std::string> instance_feedback;
    std::string refined_text;
    double checker_score = 0.0;
    bool accepted = false;
    std::map<std::string, JudgeVerdict> judge_traces;
    bool operator==(const RefinementRecord&) const = default;
};

struct TrainingExample {
    DialogContext context;
    std::string target;
    Provenance provenance = Provenance::satisfied;
    bool operator==(const TrainingExample&) const = default;
};

struct MetricReport {
    Suite suite = Suite::query;
    std::map<std::string, std::map<std::string, double>> per_item;
    std::map<std::string, double> aggregate;
    std::size_t n_items = 0;
    bool operator==(const MetricReport&) const = default;
};

// JSON mapping. Parsing is strict: missing required fields and wrong types
// throw ValidationError naming the field.
void to_json(json& j, const Turn& t);
void to_json(json& j, const DialogContext& c);
void to_json(json& j, const SearchDocument& d);
void to_json(json& j, const FeedbackRecord& r);
void to_json(json& j, const CriteriaSet& c);
void to_json(json& j, const JudgeVerdict& v);
void to_json(json& j, const RefinementRecord& r);
void to_json(json& j, const TrainingExample& e);
void to_json(json& j, const MetricReport& m);

DialogContext dialog_context_from_json(const json& j, std::string_view fallback_id = {});
SearchDocument search_document_from_json(const json& j);
FeedbackRecord feedback_record_from_json(const json& j);
CriteriaSet criteria_set_from_json(const json& j);
JudgeVerdict judge_verdict_from_json(const json& j);
RefinementRecord refinement_record_from_json(const json& j);
TrainingExample training_example_from_json(const json& j);
MetricReport metric_report_from_json(const json& j);

/// Checks the record-level invariants (non-empty turns, trimmed texts, page
/// counts only on query records). Throws ValidationError.
void validate(const FeedbackRecord& r);

std::vector<FeedbackRecord> load_records(const std::filesystem::path& path);
/// Same as load_records but keeps only records of `kind`.
std::vector<FeedbackRecord> load_records(const std::filesystem::path& path, TargetKind kind);
std::size_t save_records(const std::vector<FeedbackRecord>& records, const std::filesystem::path& path);

std::size_t save_dataset(const std::vector<TrainingExample>& examples, const std::filesystem::path& path);
std::vector<TrainingExample> load_dataset(const std::filesystem::path& path);

std::size_t save_refinements(const std::vector<RefinementRecord>& refinements, const std::filesystem::path& path);
std::vector<RefinementRecord> load_refinements(const std::filesystem::path& path);

/// Generic JSONL helpers; lines are parsed with 1-based line numbers in errors.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<json>& rows, const std::filesystem::path& path);
void write_json_file(const json& j, const std::filesystem::path& path);
json read_json_file(const std::filesystem::path& path);

}  // namespace sysfb
