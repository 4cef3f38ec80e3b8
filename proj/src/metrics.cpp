#include "sysfb/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "sysfb/errors.hpp"
#include "sysfb/prompts.hpp"

namespace sysfb {
namespace {

Tokens require_tokens(const std::string& text, const char* what) {
    auto toks = tokenize(text);
    if (toks.empty()) throw DomainError(std::string(what) + " has no tokens");
    return toks;
}

bool is_boolean_query_metric(const std::string& m) {
    return m == metric::specificity || m == metric::coverage || m == metric::satisfaction;
}

std::optional<double> query_numerator(const std::string& m, double C) {
    if (m == metric::non_copy) return 1.0;
    if (m == metric::conciseness) return 100.0;
    if (m == metric::readability) return C;
    return std::nullopt;
}

std::map<std::string, std::vector<double>> columns_of(const PerItem& per_item) {
    if (per_item.empty()) throw DomainError("aggregation needs at least one item");
    std::map<std::string, std::vector<double>> cols;
    for (const auto& [id, values] : per_item) {
        for (const auto& [m, v] : values) cols[m].push_back(v);
    }
    return cols;
}

double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

std::map<std::string, double> aggregate_feedback_suite(const PerItem& per_item) {
    if (per_item.empty()) throw DomainError("aggregation needs at least one item");
    double accepted = 0, tokens = 0, novel = 0, sentences = 0, good = 0;
    for (const auto& [id, v] : per_item) {
        accepted += v.at("accepted");
        tokens += v.at("tokens");
        novel += v.at("novel_tokens");
        sentences += v.at("sentences");
        good += v.at("grammatical_sentences");
    }
    const double n = static_cast<double>(per_item.size());
    return {{metric::success_rate, accepted / n * 100.0},
            {metric::verbosity, tokens / n},
            {metric::diversity, tokens > 0 ? novel / tokens * 100.0 : 0.0},
            {metric::grammar, sentences > 0 ? good / sentences * 100.0 : 0.0}};
}

std::string lower_ascii(std::string s) {
    for (auto& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return s;
}

}  // namespace

double non_copy_rate(const std::string& query, const std::string& user_question) {
    return 1.0 / bleu4(require_tokens(query, "query"), require_tokens(user_question, "user question"));
}

double readability(const std::string& query, const WordFrequencyTable& table, double C) {
    if (!(C > 0.0)) throw DomainError("C must be positive");
    const auto toks = require_tokens(query, "query");
    double sum = 0.0;
    for (const auto& t : toks) sum += static_cast<double>(table.rank(t));
    return C / (sum / static_cast<double>(toks.size()));
}

double conciseness(const std::string& query) {
    return 100.0 / static_cast<double>(require_tokens(query, "query").size());
}

std::map<std::string, int> coverage(const std::map<std::string, std::int64_t>& variant_page_counts) {
    if (variant_page_counts.empty()) throw DomainError("coverage needs at least one variant");
    std::int64_t best = variant_page_counts.begin()->second;
    for (const auto& [v, c] : variant_page_counts) {
        if (c < 0) throw DomainError("page count for " + v + " is negative");
        best = std::max(best, c);
    }
    std::map<std::string, int> out;
    for (const auto& [v, c] : variant_page_counts) out[v] = c == best ? 1 : 0;
    return out;
}

double groundedness(const std::string& response, const std::vector<SearchDocument>& documents) {
    if (documents.empty()) throw DomainError("groundedness needs at least one document");
    const auto r = tokenize(response);
    double best = 0.0;
    for (const auto& d : documents) best = std::max(best, rouge2_f1(r, tokenize(d.content)));
    return best;
}

const std::vector<std::string>& uncertainty_phrases() {
    static const std::vector<std::string> phrases{"i'm not sure", "i am not sure", "i don't know", "i do not know"};
    return phrases;
}

int confidence(const std::string& response) {
    std::string norm;
    norm.reserve(response.size());
    for (std::size_t i = 0; i < response.size(); ++i) {
        if (response.compare(i, 3, "\xE2\x80\x99") == 0) {
            norm.push_back('\'');
            i += 2;
        } else {
            norm.push_back(response[i]);
        }
    }
    norm = lower_ascii(std::move(norm));
    for (const auto& p : uncertainty_phrases()) {
        if (norm.find(p) != std::string::npos) return 0;
    }
    return 1;
}

std::string_view to_string(JudgeKind kind) {
    switch (kind) {
        case JudgeKind::specificity: return "specificity";
        case JudgeKind::factuality: return "factuality";
        case JudgeKind::helpfulness: return "helpfulness";
        case JudgeKind::relevance: return "relevance";
    }
    return "specificity";
}

JudgeOutcome judge_metric(JudgeKind kind, const DialogContext& context, const std::string& text,
                          const std::vector<SearchDocument>& documents, Gateway& judge) {
    Slots slots;
    slots.emplace(slot::dialog_context, serialize_dialog(context));
    PromptName name = PromptName::judge_specificity;
    switch (kind) {
        case JudgeKind::specificity:
            slots.emplace(slot::query, text);
            break;
        case JudgeKind::factuality:
            if (documents.empty()) throw DomainError("factuality judging needs search documents");
            name = PromptName::judge_factuality;
            slots.emplace(slot::search_documents, serialize_documents(documents));
            slots.emplace(slot::response, text);
            break;
        case JudgeKind::helpfulness:
            name = PromptName::judge_helpfulness;
            slots.emplace(slot::response, text);
            break;
        case JudgeKind::relevance:
            name = PromptName::judge_relevance;
            slots.emplace(slot::response, text);
            break;
    }
    auto verdict = parse_yn(judge.complete(render(name, slots), kJudgeMaxTokens));
    const int value = verdict.verdict ? 1 : 0;
    return JudgeOutcome{value, std::move(verdict)};
}

int satisfaction(const DialogContext& context, const std::string& text, TargetKind kind, QualityChecker& checker,
                 const CheckerCalibration& calibration) {
    return is_satisfactory(checker.score(context, text, kind), calibration) ? 1 : 0;
}

std::map<std::string, double> aggregate_query_suite(const PerItem& per_item, double C) {
    std::map<std::string, double> out;
    for (const auto& [m, values] : columns_of(per_item)) {
        if (auto num = query_numerator(m, C)) {
            std::vector<double> denominators;
            for (double v : values) {
                if (!(v > 0.0)) throw DomainError("reciprocal metric " + m + " has a non-positive value");
                denominators.push_back(*num / v);
            }
            out[m] = *num / mean(denominators);
        } else if (is_boolean_query_metric(m)) {
            out[m] = mean(values) * 100.0;
        } else {
            out[m] = mean(values);
        }
    }
    return out;
}

std::map<std::string, double> aggregate_response_suite(const PerItem& per_item) {
    std::map<std::string, double> out;
    for (const auto& [m, values] : columns_of(per_item)) out[m] = mean(values) * 100.0;
    return out;
}

MetricReport make_report(Suite suite, PerItem per_item, double C) {
    MetricReport report;
    report.suite = suite;
    report.n_items = per_item.size();
    switch (suite) {
        case Suite::query: report.aggregate = aggregate_query_suite(per_item, C); break;
        case Suite::response: report.aggregate = aggregate_response_suite(per_item); break;
        case Suite::feedback: report.aggregate = aggregate_feedback_suite(per_item); break;
    }
    report.per_item = std::move(per_item);
    return report;
}

bool HeuristicGrammarChecker::is_grammatical(const std::string& sentence) {
    const auto s = trim(sentence);
    if (s.empty()) return false;
    const char first = s.front();
    const bool capital = (first >= 'A' && first <= 'Z') || (first >= '0' && first <= '9') || first == '"';
    const char last = s.back();
    const bool terminal = last == '.' || last == '!' || last == '?' || last == '"';
    return capital && terminal;
}

HttpGrammarChecker::HttpGrammarChecker(std::string url, std::shared_ptr<HttpTransport> transport)
    : url_(std::move(url)), transport_(std::move(transport)) {}

bool HttpGrammarChecker::is_grammatical(const std::string& sentence) {
    const auto reply = with_retries(RetryPolicy{}, [&] { return post_json(*transport_, url_, json{{"text", sentence}}); });
    const auto it = reply.find("grammatical");
    if (it == reply.end() || !it->is_boolean()) throw ContractError("grammar reply lacks a boolean \"grammatical\"");
    return it->get<bool>();
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        current.push_back(text[i]);
        const char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i + 1;
            while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?' || text[j] == '"')) {
                current.push_back(text[j]);
                ++j;
            }
            i = j - 1;
            if (j == text.size() || text[j] == ' ' || text[j] == '\n' || text[j] == '\t' || text[j] == '\r') {
                auto t = trim(current);
                if (!t.empty()) out.push_back(std::move(t));
                current.clear();
            }
        }
    }
    auto t = trim(current);
    if (!t.empty()) out.push_back(std::move(t));
    return out;
}

MetricReport feedback_characterization(const std::vector<FeedbackSample>& samples, GrammarChecker& grammar) {
    if (samples.empty()) throw DomainError("feedback characterization needs at least one record");
    std::vector<const FeedbackSample*> ordered;
    for (const auto& s : samples) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });
    PerItem per_item;
    std::set<std::string> seen;
    for (const auto* s : ordered) {
        if (per_item.count(s->id)) throw ValidationError("duplicate feedback id " + s->id);
        const auto toks = tokenize(s->feedback);
        double novel = 0;
        for (const auto& t : toks) novel += seen.insert(t).second ? 1 : 0;
        const auto sentences = split_sentences(s->feedback);
        double good = 0;
        for (const auto& sentence : sentences) good += grammar.is_grammatical(sentence) ? 1 : 0;
        per_item[s->id] = {{"accepted", s->accepted ? 1.0 : 0.0},
                           {"tokens", static_cast<double>(toks.size())},
                           {"novel_tokens", novel},
                           {"sentences", static_cast<double>(sentences.size())},
                           {"grammatical_sentences", good}};
    }
    return make_report(Suite::feedback, std::move(per_item));
}

bool majority_vote(const std::vector<bool>& labels) {
    if (labels.empty() || labels.size() % 2 == 0) throw DomainError("majority vote needs an odd number of labels");
    const auto yes = std::count(labels.begin(), labels.end(), true);
    return static_cast<std::size_t>(yes) * 2 > labels.size();
}

double agreement(const std::vector<bool>& judge, const std::vector<bool>& human) {
    if (judge.size() != human.size()) {
        throw DomainError("label lists differ in length (" + std::to_string(judge.size()) + " vs " +
                          std::to_string(human.size()) + ")");
    }
    if (judge.empty()) throw DomainError("agreement needs at least one label");
    std::size_t same = 0;
    for (std::size_t i = 0; i < judge.size(); ++i) same += judge[i] == human[i];
    return static_cast<double>(same) / static_cast<double>(judge.size());
}

HttpSearchCountClient::HttpSearchCountClient(std::string url, std::shared_ptr<HttpTransport> transport)
    : url_(std::move(url)), transport_(std::move(transport)) {}

std::int64_t HttpSearchCountClient::pages(const std::string& query) {
    const auto reply = with_retries(RetryPolicy{}, [&] { return post_json(*transport_, url_, json{{"query", query}}); });
    const auto it = reply.find("pages");
    if (it == reply.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0) {
        throw ContractError("search-count reply lacks a non-negative integer \"pages\"");
    }
    return it->get<std::int64_t>();
}

ItemEvaluation evaluate_query_item(const DialogContext& context, const std::string& query, const EvalResources& res) {
    ItemEvaluation e;
    e.values[metric::non_copy] = non_copy_rate(query, context.last_user_turn());
    if (res.frequency_table) e.values[metric::readability] = readability(query, *res.frequency_table, res.C);
    e.values[metric::conciseness] = conciseness(query);
    if (res.judge) {
        auto outcome = judge_metric(JudgeKind::specificity, context, query, {}, *res.judge);
        e.values[metric::specificity] = outcome.value;
        e.traces[metric::specificity] = std::move(outcome.verdict);
    }
    if (res.checker && res.calibration) {
        e.values[metric::satisfaction] = satisfaction(context, query, TargetKind::query, *res.checker, *res.calibration);
    }
    return e;
}

ItemEvaluation evaluate_response_item(const DialogContext& context, const std::string& response,
                                      const std::vector<SearchDocument>& documents, const EvalResources& res) {
    ItemEvaluation e;
    if (!documents.empty()) e.values[metric::groundedness] = groundedness(response, documents);
    if (res.judge) {
        for (auto kind : {JudgeKind::factuality, JudgeKind::helpfulness, JudgeKind::relevance}) {
            if (kind == JudgeKind::factuality && documents.empty()) continue;
            auto outcome = judge_metric(kind, context, response, documents, *res.judge);
            const std::string key(to_string(kind));
            e.values[key] = outcome.value;
            e.traces[key] = std::move(outcome.verdict);
        }
    }
    e.values[metric::confidence] = confidence(response);
    if (res.checker && res.calibration) {
        e.values[metric::satisfaction] =
            satisfaction(context, response, TargetKind::response, *res.checker, *res.calibration);
    }
    return e;
}

const std::vector<std::pair<std::string, std::string>>& table_columns(Suite suite) {
    static const std::vector<std::pair<std::string, std::string>> query{
        {metric::non_copy, "Non-copy"},       {metric::specificity, "Specificity"},
        {metric::readability, "Readability"}, {metric::conciseness, "Conciseness"},
        {metric::coverage, "Coverage"},       {metric::satisfaction, "Satisfaction"}};
    static const std::vector<std::pair<std::string, std::string>> response{
        {metric::groundedness, "GRD"}, {metric::factuality, "Fact."}, {metric::helpfulness, "Help."},
        {metric::relevance, "Rel."},   {metric::confidence, "Conf."}, {metric::satisfaction, "Sat."}};
    static const std::vector<std::pair<std::string, std::string>> feedback{{metric::success_rate, "Success"},
                                                                           {metric::verbosity, "Verbosity"},
                                                                           {metric::diversity, "Diversity"},
                                                                           {metric::grammar, "Grammar"}};
    switch (suite) {
        case Suite::query: return query;
        case Suite::response: return response;
        case Suite::feedback: return feedback;
    }
    return query;
}

std::string format_table(Suite suite, const std::vector<std::pair<std::string, std::map<std::string, double>>>& rows) {
    const auto& cols = table_columns(suite);
    std::size_t label_width = 8;
    for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
    std::vector<std::size_t> widths;
    for (const auto& [_, header] : cols) widths.push_back(std::max<std::size_t>(header.size(), 9));

    std::ostringstream out;
    auto pad = [&](const std::string& s, std::size_t w, bool left) {
        if (s.size() >= w) return s;
        return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
    };
    out << pad("Criteria", label_width, true);
    for (std::size_t c = 0; c < cols.size(); ++c) out << "  " << pad(cols[c].second, widths[c], false);
    out << '\n';
    for (const auto& [label, values] : rows) {
        out << pad(label, label_width, true);
        for (std::size_t c = 0; c < cols.size(); ++c) {
            std::string cell = "-";
            auto it = values.find(cols[c].first);
            if (it != values.end()) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.2f", it->second);
                cell = buf;
            }
            out << "  " << pad(cell, widths[c], false);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace sysfb
