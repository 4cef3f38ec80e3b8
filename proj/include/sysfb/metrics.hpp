#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sysfb/data_model.hpp"
#include "sysfb/gateway.hpp"
#include "sysfb/quality_checker.hpp"
#include "sysfb/text_analysis.hpp"

namespace sysfb {

inline constexpr double kDefaultReadabilityC = 100000.0;

namespace metric {
inline constexpr const char* non_copy = "non_copy";
inline constexpr const char* specificity = "specificity";
inline constexpr const char* readability = "readability";
inline constexpr const char* conciseness = "conciseness";
inline constexpr const char* coverage = "coverage";
inline constexpr const char* satisfaction = "satisfaction";
inline constexpr const char* groundedness = "groundedness";
inline constexpr const char* factuality = "factuality";
inline constexpr const char* helpfulness = "helpfulness";
inline constexpr const char* relevance = "relevance";
inline constexpr const char* confidence = "confidence";
inline constexpr const char* success_rate = "success_rate";
inline constexpr const char* verbosity = "verbosity";
inline constexpr const char* diversity = "diversity";
inline constexpr const char* grammar = "grammar";
}  // namespace metric

// Formula metrics.

/// 1 / smoothed BLEU-4 of the query against the user's question.
double non_copy_rate(const std::string& query, const std::string& user_question);
/// C over the mean frequency rank of the query's tokens.
double readability(const std::string& query, const WordFrequencyTable& table, double C = kDefaultReadabilityC);
/// 100 over the token count.
double conciseness(const std::string& query);
/// 1 for every variant attaining the maximum page count, 0 otherwise.
std::map<std::string, int> coverage(const std::map<std::string, std::int64_t>& variant_page_counts);
/// Best ROUGE-2 F1 of the response against any document's content.
double groundedness(const std::string& response, const std::vector<SearchDocument>& documents);
/// 0 when the response contains an uncertainty phrase, else 1.
int confidence(const std::string& response);
const std::vector<std::string>& uncertainty_phrases();

// Model-judged metrics.

enum class JudgeKind { specificity, factuality, helpfulness, relevance };
std::string_view to_string(JudgeKind kind);

struct JudgeOutcome {
    int value = 0;
    JudgeVerdict verdict;
};

/// `text` is the query for specificity and the response otherwise.
/// Factuality needs documents (DomainError otherwise).
JudgeOutcome judge_metric(JudgeKind kind, const DialogContext& context, const std::string& text,
                          const std::vector<SearchDocument>& documents, Gateway& judge);

int satisfaction(const DialogContext& context, const std::string& text, TargetKind kind, QualityChecker& checker,
                 const CheckerCalibration& calibration);

// Aggregation.

using PerItem = std::map<std::string, std::map<std::string, double>>;

/// Reciprocal-form metrics aggregate as numerator / mean(numerator / value);
/// boolean metrics as the percentage of ones. Each metric is aggregated over
/// the items that carry it.
std::map<std::string, double> aggregate_query_suite(const PerItem& per_item, double C = kDefaultReadabilityC);
/// Arithmetic mean per metric, times 100 (every response metric is a 0..1 value).
std::map<std::string, double> aggregate_response_suite(const PerItem& per_item);

MetricReport make_report(Suite suite, PerItem per_item, double C = kDefaultReadabilityC);

// Feedback characterization.

class GrammarChecker {
public:
    virtual ~GrammarChecker() = default;
    virtual bool is_grammatical(const std::string& sentence) = 0;
    virtual std::string name() const = 0;
};

/// Accepts a sentence iff it starts with an uppercase letter or digit and ends
/// with terminal punctuation.
class HeuristicGrammarChecker : public GrammarChecker {
public:
    bool is_grammatical(const std::string& sentence) override;
    std::string name() const override { return "heuristic"; }
};

/// POST {"text"} -> {"grammatical": bool}.
class HttpGrammarChecker : public GrammarChecker {
public:
    HttpGrammarChecker(std::string url, std::shared_ptr<HttpTransport> transport);
    bool is_grammatical(const std::string& sentence) override;
    std::string name() const override { return "remote"; }

private:
    std::string url_;
    std::shared_ptr<HttpTransport> transport_;
};

/// Splits after '.', '!' or '?' runs followed by whitespace; the tail counts
/// as a sentence too. Blank pieces are dropped.
std::vector<std::string> split_sentences(const std::string& text);

struct FeedbackSample {
    std::string id;
    std::string feedback;
    bool accepted = false;
};

/// Per item: accepted, tokens, novel_tokens (tokens not seen in earlier
/// items, in id order), sentences, grammatical_sentences. Aggregates:
/// success_rate, verbosity, diversity, grammar.
MetricReport feedback_characterization(const std::vector<FeedbackSample>& samples, GrammarChecker& grammar);

// Judge meta-evaluation.

bool majority_vote(const std::vector<bool>& labels);
double agreement(const std::vector<bool>& judge, const std::vector<bool>& human);

// Page counts for coverage.

class SearchCountClient {
public:
    virtual ~SearchCountClient() = default;
    virtual std::int64_t pages(const std::string& query) = 0;
};

/// POST {"query"} -> {"pages"}.
class HttpSearchCountClient : public SearchCountClient {
public:
    HttpSearchCountClient(std::string url, std::shared_ptr<HttpTransport> transport);
    std::int64_t pages(const std::string& query) override;

private:
    std::string url_;
    std::shared_ptr<HttpTransport> transport_;
};

// Per-item evaluation.

struct EvalResources {
    const WordFrequencyTable* frequency_table = nullptr;
    double C = kDefaultReadabilityC;
    Gateway* judge = nullptr;
    QualityChecker* checker = nullptr;
    std::optional<CheckerCalibration> calibration;
};

struct ItemEvaluation {
    std::map<std::string, double> values;
    std::map<std::string, JudgeVerdict> traces;
};

/// Non-copy, readability (when a table is given), conciseness, specificity
/// (when a judge is given), satisfaction (when checker and calibration are given).
ItemEvaluation evaluate_query_item(const DialogContext& context, const std::string& query, const EvalResources& res);
/// Groundedness and factuality need documents and are skipped without them.
ItemEvaluation evaluate_response_item(const DialogContext& context, const std::string& response,
                                      const std::vector<SearchDocument>& documents, const EvalResources& res);

/// Fixed-width text table, one row per (label, aggregate) pair, with the
/// column order used for each suite.
std::string format_table(Suite suite, const std::vector<std::pair<std::string, std::map<std::string, double>>>& rows);
/// (metric key, column header) in display order.
const std::vector<std::pair<std::string, std::string>>& table_columns(Suite suite);

}  // namespace sysfb
