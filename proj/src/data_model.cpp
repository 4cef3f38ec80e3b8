#include "sysfb/data_model.hpp"

#include <fstream>
#include <set>

#include "sysfb/errors.hpp"
#include "sysfb/text_analysis.hpp"
#include "json_fields.hpp"

namespace sysfb {
using namespace detail;
namespace {

template <typename Parse>
auto read_typed_jsonl(const std::filesystem::path& path, Parse parse) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<decltype(parse(json{}))> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        try {
            out.push_back(parse(j));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return out;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

template <typename T>
std::size_t write_typed_jsonl(const std::vector<T>& rows, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    for (const auto& row : rows) out << json(row).dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
    return rows.size();
}

}  // namespace

std::string_view to_string(Speaker s) { return s == Speaker::user ? "user" : "bot"; }
std::string_view to_string(TargetKind k) { return k == TargetKind::query ? "query" : "response"; }
std::string_view to_string(Provenance p) { return p == Provenance::satisfied ? "satisfied" : "refined"; }
std::string_view to_string(Suite s) {
    switch (s) {
        case Suite::query: return "query";
        case Suite::response: return "response";
        case Suite::feedback: return "feedback";
    }
    return "query";
}

TargetKind parse_target_kind(std::string_view s) {
    if (s == "query") return TargetKind::query;
    if (s == "response") return TargetKind::response;
    throw ValidationError("target kind must be \"query\" or \"response\", got \"" + std::string(s) + "\"");
}

Suite parse_suite(std::string_view s) {
    if (s == "query") return Suite::query;
    if (s == "response") return Suite::response;
    if (s == "feedback") return Suite::feedback;
    throw ValidationError("unknown metric suite \"" + std::string(s) + "\"");
}

const std::string& DialogContext::last_user_turn() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->speaker == Speaker::user) return it->text;
    }
    throw DomainError("dialog context " + id + " has no user turn");
}

void to_json(json& j, const Turn& t) { j = json{{"speaker", to_string(t.speaker)}, {"text", t.text}}; }

void to_json(json& j, const DialogContext& c) {
    j = json::object();
    if (!c.id.empty()) j["id"] = c.id;
    j["turns"] = c.turns;
}

void to_json(json& j, const SearchDocument& d) {
    j = json{{"title", d.title}, {"content", d.content}, {"result_page_count", nullptr}};
    if (d.result_page_count) j["result_page_count"] = *d.result_page_count;
}

void to_json(json& j, const FeedbackRecord& r) {
    j = r.extra.is_object() ? r.extra : json::object();
    j["id"] = r.id;
    j["target_kind"] = to_string(r.target_kind);
    j["context"] = r.context;
    j["original_text"] = r.original_text;
    j["satisfied"] = r.satisfied;
    j["feedback_text"] = r.feedback_text ? json(*r.feedback_text) : json(nullptr);
    j["search_documents"] = r.search_documents ? json(*r.search_documents) : json(nullptr);
}

void to_json(json& j, const CriteriaSet& c) {
    j = json{{"id", c.id}, {"target_kind", to_string(c.target_kind)}, {"label", c.label}, {"criteria", c.criteria}};
}

void to_json(json& j, const JudgeVerdict& v) {
    j = json{{"reasoning", v.reasoning}, {"verdict", v.verdict}, {"raw", v.raw}};
}

void to_json(json& j, const RefinementRecord& r) {
    j = json{{"source", r.source},
             {"criteria_id", r.criteria_id},
             {"instance_feedback", r.instance_feedback ? json(*r.instance_feedback) : json(nullptr)},
             {"refined_text", r.refined_text},
             {"checker_score", r.checker_score},
             {"accepted", r.accepted},
             {"judge_traces", r.judge_traces}};
}

void to_json(json& j, const TrainingExample& e) {
    j = json{{"context", e.context}, {"target", e.target}, {"provenance", to_string(e.provenance)}};
}

void to_json(json& j, const MetricReport& m) {
    j = json{{"suite", to_string(m.suite)},
             {"n_items", m.n_items},
             {"aggregate", m.aggregate},
             {"per_item", m.per_item}};
}

DialogContext dialog_context_from_json(const json& j, std::string_view fallback_id) {
    DialogContext c;
    c.id = j.is_object() && j.contains("id") ? require_string(j, "id") : std::string(fallback_id);
    const auto& turns = require_array(j, "turns");
    for (const auto& t : turns) {
        Turn turn;
        const auto speaker = require_string(t, "speaker");
        if (speaker == "user") {
            turn.speaker = Speaker::user;
        } else if (speaker == "bot") {
            turn.speaker = Speaker::bot;
        } else {
            throw ValidationError("speaker must be \"user\" or \"bot\", got \"" + speaker + "\"");
        }
        turn.text = require_string(t, "text");
        c.turns.push_back(std::move(turn));
    }
    return c;
}

SearchDocument search_document_from_json(const json& j) {
    SearchDocument d;
    d.title = require_string(j, "title");
    d.content = require_string(j, "content");
    auto it = j.find("result_page_count");
    if (it != j.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
            throw ValidationError("field \"result_page_count\" must be a non-negative integer or null");
        }
        d.result_page_count = it->get<std::int64_t>();
    }
    return d;
}

FeedbackRecord feedback_record_from_json(const json& j) {
    static const std::set<std::string> known{"id", "target_kind", "context", "original_text",
                                             "satisfied", "feedback_text", "search_documents"};
    FeedbackRecord r;
    r.id = require_string(j, "id");
    r.target_kind = parse_target_kind(require_string(j, "target_kind"));
    r.context = dialog_context_from_json(require(j, "context"), r.id);
    r.original_text = require_string(j, "original_text");
    r.satisfied = require_bool(j, "satisfied");
    r.feedback_text = optional_string(j, "feedback_text");
    auto docs = j.find("search_documents");
    if (docs != j.end() && !docs->is_null()) {
        if (!docs->is_array()) throw ValidationError("field \"search_documents\" must be an array or null");
        std::vector<SearchDocument> parsed;
        for (const auto& d : *docs) parsed.push_back(search_document_from_json(d));
        r.search_documents = std::move(parsed);
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) r.extra[key] = value;
    }
    validate(r);
    return r;
}

CriteriaSet criteria_set_from_json(const json& j) {
    CriteriaSet c;
    c.id = require_string(j, "id");
    c.target_kind = parse_target_kind(require_string(j, "target_kind"));
    c.label = j.contains("label") ? require_string(j, "label") : c.id;
    for (const auto& item : require_array(j, "criteria")) {
        if (!item.is_string()) throw ValidationError("criteria entries must be strings");
        auto text = trim(item.get<std::string>());
        if (text.empty()) throw ValidationError("criteria entries must be non-empty");
        c.criteria.push_back(std::move(text));
    }
    if (c.id.empty()) throw ValidationError("criteria id must be non-empty");
    return c;
}

JudgeVerdict judge_verdict_from_json(const json& j) {
    return JudgeVerdict{require_string(j, "reasoning"), require_bool(j, "verdict"), require_string(j, "raw")};
}

RefinementRecord refinement_record_from_json(const json& j) {
    RefinementRecord r;
    r.source = require_string(j, "source");
    r.criteria_id = require_string(j, "criteria_id");
    r.instance_feedback = optional_string(j, "instance_feedback");
    r.refined_text = require_string(j, "refined_text");
    r.checker_score = require_number(j, "checker_score");
    r.accepted = require_bool(j, "accepted");
    if (auto it = j.find("judge_traces"); it != j.end() && !it->is_null()) {
        for (const auto& [name, v] : it->items()) r.judge_traces[name] = judge_verdict_from_json(v);
    }
    return r;
}

TrainingExample training_example_from_json(const json& j) {
    TrainingExample e;
    e.context = dialog_context_from_json(require(j, "context"));
    e.target = require_string(j, "target");
    const auto p = require_string(j, "provenance");
    if (p == "satisfied") {
        e.provenance = Provenance::satisfied;
    } else if (p == "refined") {
        e.provenance = Provenance::refined;
    } else {
        throw ValidationError("provenance must be \"satisfied\" or \"refined\"");
    }
    return e;
}

MetricReport metric_report_from_json(const json& j) {
    MetricReport m;
    m.suite = parse_suite(require_string(j, "suite"));
    m.n_items = require(j, "n_items").get<std::size_t>();
    m.aggregate = require(j, "aggregate").get<std::map<std::string, double>>();
    m.per_item = require(j, "per_item").get<std::map<std::string, std::map<std::string, double>>>();
    return m;
}

void validate(const FeedbackRecord& r) {
    if (r.id.empty()) throw ValidationError("record id must be non-empty");
    if (r.context.turns.empty()) throw ValidationError("record " + r.id + ": context needs at least one turn");
    for (const auto& t : r.context.turns) {
        if (trim(t.text).empty()) throw ValidationError("record " + r.id + ": turn text is blank");
    }
    if (r.search_documents) {
        for (const auto& d : *r.search_documents) {
            if (trim(d.content).empty()) {
                throw ValidationError("record " + r.id + ": search document content is blank");
            }
            if (d.result_page_count && r.target_kind != TargetKind::query) {
                throw ValidationError("record " + r.id + ": result_page_count is only valid on query records");
            }
        }
    }
}

std::vector<FeedbackRecord> load_records(const std::filesystem::path& path) {
    auto records = read_typed_jsonl(path, feedback_record_from_json);
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) throw ValidationError("duplicate record id \"" + r.id + "\"");
    }
    return records;
}

std::vector<FeedbackRecord> load_records(const std::filesystem::path& path, TargetKind kind) {
    auto all = load_records(path);
    std::vector<FeedbackRecord> out;
    for (auto& r : all) {
        if (r.target_kind == kind) out.push_back(std::move(r));
    }
    return out;
}

std::size_t save_records(const std::vector<FeedbackRecord>& records, const std::filesystem::path& path) {
    return write_typed_jsonl(records, path);
}

std::size_t save_dataset(const std::vector<TrainingExample>& examples, const std::filesystem::path& path) {
    return write_typed_jsonl(examples, path);
}

std::vector<TrainingExample> load_dataset(const std::filesystem::path& path) {
    return read_typed_jsonl(path, training_example_from_json);
}

std::size_t save_refinements(const std::vector<RefinementRecord>& refinements, const std::filesystem::path& path) {
    return write_typed_jsonl(refinements, path);
}

std::vector<RefinementRecord> load_refinements(const std::filesystem::path& path) {
    return read_typed_jsonl(path, refinement_record_from_json);
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    return read_typed_jsonl(path, [](const json& j) { return j; });
}

void write_jsonl(const std::vector<json>& rows, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    for (const auto& row : rows) out << row.dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace sysfb
