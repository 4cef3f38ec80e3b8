#include "sysfb/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "json_fields.hpp"
#include "sysfb/errors.hpp"
#include "sysfb/hashing.hpp"
#include "sysfb/prompts.hpp"
#include "sysfb/text_analysis.hpp"

namespace sysfb {
using namespace detail;
namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t range) {
    const std::uint64_t threshold = (0 - range) % range;
    for (;;) {
        const std::uint64_t x = rng();
        if (x >= threshold) return x % range;
    }
}

std::string error_reason(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return std::string(err->kind()) + ": " + err->what();
    return std::string("error: ") + e.what();
}

std::string short_hash(const json& j) { return sha256_hex(j.dump()).substr(0, 12); }

enum class Outcome { accepted, discarded, skipped };

struct Attempt {
    Outcome outcome = Outcome::discarded;
    std::string reason;
    std::optional<RefinementRecord> refinement;
};

}  // namespace

std::string_view to_string(FeedbackMode m) {
    switch (m) {
        case FeedbackMode::none: return "none";
        case FeedbackMode::human: return "human";
        case FeedbackMode::model: return "model";
    }
    return "none";
}

FeedbackMode parse_feedback_mode(std::string_view s) {
    if (s == "none") return FeedbackMode::none;
    if (s == "human") return FeedbackMode::human;
    if (s == "model") return FeedbackMode::model;
    throw ValidationError("feedback mode must be none, human or model, got \"" + std::string(s) + "\"");
}

std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t n, std::mt19937_64& rng) {
    n = std::min(n, pool);
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded(rng, pool - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
    const auto workers = std::max<std::size_t>(1, std::min(parallelism, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                if (failed.load()) return;
                const auto i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first) first = std::current_exception();
                    failed = true;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first) std::rethrow_exception(first);
}

std::string refine(const FeedbackRecord& record, const CriteriaSet& criteria,
                   const std::optional<std::string>& feedback, Gateway& refiner) {
    return trim(refiner.complete(refinement_prompt(record, criteria, feedback), kRefineMaxTokens));
}

BuildResult build_training_dataset(const std::vector<FeedbackRecord>& records, const CriteriaSet& criteria,
                                   FeedbackMode feedback_mode, Gateway& refiner, QualityChecker& checker,
                                   const CheckerCalibration& calibration, const BuildOptions& options) {
    if (feedback_mode == FeedbackMode::model && !options.feedback_model) {
        throw ValidationError("feedback mode \"model\" needs a feedback model endpoint");
    }
    std::vector<const FeedbackRecord*> satisfied, unsatisfied;
    for (const auto& r : records) {
        if (r.target_kind != criteria.target_kind) continue;
        (r.satisfied ? satisfied : unsatisfied).push_back(&r);
    }
    std::mt19937_64 rng(options.seed);
    std::vector<const FeedbackRecord*> pass, todo;
    for (auto i : sample_indices(satisfied.size(), options.n_satisfied, rng)) pass.push_back(satisfied[i]);
    for (auto i : sample_indices(unsatisfied.size(), options.n_unsatisfied, rng)) todo.push_back(unsatisfied[i]);
    auto by_id = [](const FeedbackRecord* a, const FeedbackRecord* b) { return a->id < b->id; };
    std::sort(pass.begin(), pass.end(), by_id);
    std::sort(todo.begin(), todo.end(), by_id);

    const bool use_feedback = feedback_mode != FeedbackMode::none && criteria.target_kind == TargetKind::response;
    std::vector<Attempt> attempts(todo.size());
    parallel_for(todo.size(), options.parallelism, [&](std::size_t i) {
        const auto& rec = *todo[i];
        auto& attempt = attempts[i];
        std::optional<std::string> feedback;
        if (use_feedback && feedback_mode == FeedbackMode::human) {
            if (!rec.feedback_text || trim(*rec.feedback_text).empty()) {
                attempt.outcome = Outcome::skipped;
                attempt.reason = "no feedback_text for human feedback mode";
                return;
            }
            feedback = *rec.feedback_text;
        }
        try {
            if (use_feedback && feedback_mode == FeedbackMode::model) {
                feedback = generate_model_feedback(rec.context, rec.original_text, *options.feedback_model);
            }
            auto refined = refine(rec, criteria, feedback, refiner);
            if (refined.empty()) {
                attempt.reason = "empty refinement";
                return;
            }
            const double score = checker.score(rec.context, refined, rec.target_kind);
            const bool accepted = is_satisfactory(score, calibration);
            attempt.refinement = RefinementRecord{rec.id, criteria.id, feedback, std::move(refined), score, accepted, {}};
            attempt.outcome = accepted ? Outcome::accepted : Outcome::discarded;
            attempt.reason = accepted ? "checker accepted" : "checker score below threshold";
        } catch (const Error& e) {
            attempt.outcome = Outcome::discarded;
            attempt.reason = error_reason(e);
        }
    });

    BuildResult result;
    auto& run = result.run;
    run.criteria_id = criteria.id;
    run.feedback_mode = feedback_mode;
    run.seed = options.seed;
    run.satisfied_passthrough = pass.size();

    struct Row {
        const std::string* id;
        std::optional<TrainingExample> example;
        RunLogEntry log;
    };
    std::vector<Row> rows;
    for (const auto* r : pass) {
        rows.push_back({&r->id, TrainingExample{r->context, r->original_text, Provenance::satisfied},
                        RunLogEntry{r->id, "passthrough", "satisfied record"}});
    }
    for (std::size_t i = 0; i < todo.size(); ++i) {
        const auto& a = attempts[i];
        const auto* r = todo[i];
        Row row{&r->id, std::nullopt, RunLogEntry{r->id, "", a.reason}};
        switch (a.outcome) {
            case Outcome::accepted:
                ++run.refined_accepted;
                row.log.outcome = "accepted";
                row.example = TrainingExample{r->context, a.refinement->refined_text, Provenance::refined};
                break;
            case Outcome::discarded:
                ++run.refined_discarded;
                row.log.outcome = "discarded";
                break;
            case Outcome::skipped:
                ++run.skipped;
                row.log.outcome = "skipped";
                break;
        }
        if (a.refinement) result.refinements.push_back(*a.refinement);
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return *a.id < *b.id; });
    std::vector<std::string> ids;
    for (auto& row : rows) {
        ids.push_back(*row.id);
        if (row.example) result.dataset.push_back(std::move(*row.example));
        result.log.push_back(std::move(row.log));
    }
    run.id = options.run_id.empty()
                 ? "build-" + short_hash(json{{"criteria", criteria},
                                              {"mode", to_string(feedback_mode)},
                                              {"seed", options.seed},
                                              {"ids", ids}})
                 : options.run_id;
    return result;
}

AblationResult run_ablation(const std::vector<CriteriaSet>& variants, const std::vector<FeedbackRecord>& records,
                            Gateway& refiner, const EvalResources& resources, const AblationOptions& options) {
    if (variants.size() < 2) throw DomainError("an ablation needs at least two criteria variants");
    if (records.empty()) throw DomainError("an ablation needs at least one record");
    const auto kind = variants.front().target_kind;
    for (const auto& v : variants) {
        if (v.target_kind != kind) throw ValidationError("criteria variants mix query and response sets");
    }
    for (const auto& r : records) {
        if (r.target_kind != kind) throw ValidationError("record " + r.id + " does not match the variants' kind");
    }

    std::vector<const FeedbackRecord*> sample;
    if (options.sample_size == 0 || options.sample_size >= records.size()) {
        for (const auto& r : records) sample.push_back(&r);
    } else {
        std::mt19937_64 rng(options.seed);
        for (auto i : sample_indices(records.size(), options.sample_size, rng)) sample.push_back(&records[i]);
    }
    std::sort(sample.begin(), sample.end(), [](auto* a, auto* b) { return a->id < b->id; });

    const auto n = sample.size();
    const auto nv = variants.size();
    std::vector<std::vector<std::map<std::string, double>>> values(nv, std::vector<std::map<std::string, double>>(n));
    std::vector<std::vector<std::string>> refined(nv, std::vector<std::string>(n));
    std::vector<std::string> failure(n);
    std::mutex failure_mu;

    parallel_for(nv * n, options.parallelism, [&](std::size_t job) {
        const auto v = job / n;
        const auto i = job % n;
        const auto& rec = *sample[i];
        try {
            refined[v][i] = refine(rec, variants[v], std::nullopt, refiner);
            if (refined[v][i].empty()) throw ContractError("empty refinement");
            const auto docs = rec.search_documents.value_or(std::vector<SearchDocument>{});
            auto eval = kind == TargetKind::query ? evaluate_query_item(rec.context, refined[v][i], resources)
                                                  : evaluate_response_item(rec.context, refined[v][i], docs, resources);
            values[v][i] = std::move(eval.values);
        } catch (const Error& e) {
            std::lock_guard lock(failure_mu);
            if (failure[i].empty()) failure[i] = "variant " + variants[v].id + ": " + error_reason(e);
        }
    });

    if (kind == TargetKind::query && options.search) {
        parallel_for(n, options.parallelism, [&](std::size_t i) {
            if (!failure[i].empty()) return;
            try {
                std::map<std::string, std::int64_t> counts;
                for (std::size_t v = 0; v < nv; ++v) counts[std::to_string(v)] = options.search->pages(refined[v][i]);
                const auto flags = coverage(counts);
                for (std::size_t v = 0; v < nv; ++v) values[v][i][metric::coverage] = flags.at(std::to_string(v));
            } catch (const Error& e) {
                std::lock_guard lock(failure_mu);
                failure[i] = "coverage: " + error_reason(e);
            }
        });
    }

    AblationResult result;
    result.kind = kind;
    for (std::size_t i = 0; i < n; ++i) {
        if (failure[i].empty()) {
            result.sample_ids.push_back(sample[i]->id);
        } else {
            result.dropped[sample[i]->id] = failure[i];
        }
    }
    if (result.sample_ids.empty()) throw DomainError("every ablation item failed in some variant");
    for (std::size_t v = 0; v < nv; ++v) {
        PerItem per_item;
        for (std::size_t i = 0; i < n; ++i) {
            if (failure[i].empty()) per_item[sample[i]->id] = values[v][i];
        }
        const auto suite = kind == TargetKind::query ? Suite::query : Suite::response;
        result.rows.push_back(AblationRow{variants[v].id, variants[v].label.empty() ? variants[v].id : variants[v].label,
                                          make_report(suite, std::move(per_item), resources.C)});
    }
    if (options.id.empty()) {
        json key{{"variants", variants}, {"ids", result.sample_ids}, {"seed", options.seed}};
        result.id = "ablation-" + short_hash(key);
    } else {
        result.id = options.id;
    }
    return result;
}

json training_manifest(const PipelineRun& run, const ManifestInputs& inputs) {
    return json{{"run", run},
                {"dataset_path", inputs.dataset_path.string()},
                {"refinements_path", inputs.refinements_path.string()},
                {"run_log_path", inputs.log_path.string()},
                {"counts",
                 {{"satisfied_passthrough", run.satisfied_passthrough},
                  {"refined_accepted", run.refined_accepted},
                  {"refined_discarded", run.refined_discarded},
                  {"skipped", run.skipped},
                  {"dataset_size", run.satisfied_passthrough + run.refined_accepted}}},
                {"criteria", inputs.criteria},
                {"criteria_text", format_criteria(inputs.criteria.criteria)},
                {"training",
                 {{"optimizer", "adam"},
                  {"learning_rate", 7e-6},
                  {"batch_size", 8},
                  {"epochs", 3},
                  {"checkpoint_selection", "best_validation_loss"}}}};
}

void emit_training_manifest(const PipelineRun& run, const ManifestInputs& inputs, const std::filesystem::path& path) {
    write_json_file(training_manifest(run, inputs), path);
}

void to_json(json& j, const PipelineRun& r) {
    j = json{{"id", r.id},
             {"criteria_id", r.criteria_id},
             {"use_instance_feedback", to_string(r.feedback_mode)},
             {"counts",
              {{"satisfied_passthrough", r.satisfied_passthrough},
               {"refined_accepted", r.refined_accepted},
               {"refined_discarded", r.refined_discarded},
               {"skipped", r.skipped}}},
             {"seed", r.seed}};
}

void to_json(json& j, const RunLogEntry& e) { j = json{{"id", e.id}, {"outcome", e.outcome}, {"reason", e.reason}}; }

void to_json(json& j, const AblationResult& a) {
    json rows = json::array();
    for (const auto& r : a.rows) rows.push_back(json{{"criteria_id", r.criteria_id}, {"label", r.label}, {"report", r.report}});
    j = json{{"id", a.id},
             {"kind", to_string(a.kind)},
             {"rows", rows},
             {"sample_ids", a.sample_ids},
             {"dropped", a.dropped},
             {"drop_count", a.dropped.size()}};
}

PipelineRun pipeline_run_from_json(const json& j) {
    PipelineRun r;
    r.id = require_string(j, "id");
    r.criteria_id = require_string(j, "criteria_id");
    r.feedback_mode = parse_feedback_mode(require_string(j, "use_instance_feedback"));
    const auto& c = require(j, "counts");
    r.satisfied_passthrough = require_count(c, "satisfied_passthrough");
    r.refined_accepted = require_count(c, "refined_accepted");
    r.refined_discarded = require_count(c, "refined_discarded");
    r.skipped = require_count(c, "skipped");
    r.seed = require(j, "seed").get<std::uint64_t>();
    return r;
}

RunLogEntry run_log_entry_from_json(const json& j) {
    return RunLogEntry{require_string(j, "id"), require_string(j, "outcome"), require_string(j, "reason")};
}

AblationResult ablation_result_from_json(const json& j) {
    AblationResult a;
    a.id = require_string(j, "id");
    a.kind = parse_target_kind(require_string(j, "kind"));
    for (const auto& r : require_array(j, "rows")) {
        a.rows.push_back(AblationRow{require_string(r, "criteria_id"), require_string(r, "label"),
                                     metric_report_from_json(require(r, "report"))});
    }
    for (const auto& id : require_array(j, "sample_ids")) a.sample_ids.push_back(id.get<std::string>());
    for (const auto& [id, reason] : require(j, "dropped").items()) a.dropped[id] = reason.get<std::string>();
    return a;
}

}  // namespace sysfb
