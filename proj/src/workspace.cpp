#include "sysfb/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <set>

#include "sysfb/endpoints.hpp"
#include "sysfb/errors.hpp"
#include "sysfb/prompts.hpp"

namespace sysfb {

bool is_safe_id(const std::string& id) {
    if (id.empty() || id.front() == '.') return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

RunLock::RunLock(const std::filesystem::path& path, bool wait) {
    std::filesystem::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string() + ": " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX | (wait ? 0 : LOCK_NB)) != 0) {
        const int err = errno;
        ::close(fd_);
        fd_ = -1;
        if (err == EWOULDBLOCK) throw ConflictError("another job is running in " + path.parent_path().parent_path().string());
        throw IoError("cannot lock " + path.string() + ": " + std::strerror(err));
    }
}

RunLock::~RunLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

std::shared_ptr<Gateway> Workspace::make_gateway(const EndpointConfig& e, const std::string& role) {
    (void)role;
    Gateway::Options opts;
    opts.endpoint_id = e.url;
    opts.model_id = e.model;
    opts.retry = config_.retry;
    opts.parallelism = static_cast<std::ptrdiff_t>(config_.parallelism);
    opts.requests_per_second = e.requests_per_second;
    return std::make_shared<Gateway>(make_completion_client(e.url, e.api_key, transport_), cache_, opts);
}

Workspace::Workspace(RunConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(transport ? std::move(transport) : std::make_shared<HttplibTransport>()) {
    for (const char* sub : {"data", "cache", "criteria", "datasets", "reports", "logs"}) {
        std::filesystem::create_directories(run_dir() / sub);
    }
    cache_ = std::make_shared<ResponseCache>(run_dir() / "cache");
    refiner_ = make_gateway(config_.refiner, "refiner");
    judge_ = make_gateway(config_.judge, "judge");
    feedback_ = config_.feedback.url == config_.refiner.url && config_.feedback.model == config_.refiner.model
                    ? refiner_
                    : make_gateway(config_.feedback, "feedback");
    checker_ = std::make_shared<QualityChecker>(make_score_client(config_.checker.url, transport_), cache_,
                                                config_.checker.url, config_.retry);
    embedder_ = make_embedder(config_.embedder.url, transport_, config_.retry, config_.parallelism);
    search_ = make_search_client(config_.search.url, transport_);
    grammar_ = make_grammar_checker(config_.grammar.url, transport_);
    if (config_.frequency_table) frequency_table_ = load_frequency_table(*config_.frequency_table);
    criteria_ = std::make_unique<CriteriaStore>(run_dir() / "criteria");
}

std::vector<std::string> Workspace::remote_endpoints() const {
    std::vector<std::string> out;
    for (const auto* e : {&config_.refiner, &config_.judge, &config_.checker, &config_.embedder, &config_.feedback,
                          &config_.search, &config_.grammar}) {
        if (is_remote_url(e->url) && std::find(out.begin(), out.end(), e->url) == out.end()) out.push_back(e->url);
    }
    return out;
}

void Workspace::check_endpoints() const {
    for (const auto& url : remote_endpoints()) {
        if (!endpoint_reachable(url)) throw TransportError("model endpoint unreachable: " + url);
    }
}

IngestSummary Workspace::ingest(const std::filesystem::path& input) {
    auto recs = load_records(input);
    IngestSummary s;
    s.total = recs.size();
    for (const auto& r : recs) {
        (r.target_kind == TargetKind::query ? s.query : s.response) += 1;
        (r.satisfied ? s.satisfied : s.unsatisfied) += 1;
    }
    std::lock_guard lock(files_mu_);
    save_records(recs, records_path());
    s.path = records_path();
    return s;
}

std::vector<FeedbackRecord> Workspace::records() const {
    if (!std::filesystem::exists(records_path())) {
        throw ValidationError("no ingested records in " + run_dir().string() + "; run ingest first");
    }
    return load_records(records_path());
}

std::vector<FeedbackRecord> Workspace::records(TargetKind kind) const {
    auto all = records();
    std::vector<FeedbackRecord> out;
    for (auto& r : all) {
        if (r.target_kind == kind) out.push_back(std::move(r));
    }
    return out;
}

std::filesystem::path Workspace::clusters_path(TargetKind kind) const {
    return reports_dir() / ("clusters-" + std::string(to_string(kind)) + ".json");
}
std::filesystem::path Workspace::corpus_path(TargetKind kind) const {
    return reports_dir() / ("corpus-" + std::string(to_string(kind)) + ".json");
}
std::filesystem::path Workspace::calibration_path(TargetKind kind) const {
    return reports_dir() / ("calibration-" + std::string(to_string(kind)) + ".json");
}

GroupReport Workspace::cluster(TargetKind kind, std::optional<std::size_t> k, std::optional<std::uint64_t> seed) {
    const auto corpus = build_corpus(records(), kind, *embedder_);
    if (corpus.size() == 0) throw DomainError("no unsatisfied " + std::string(to_string(kind)) + " records with feedback");
    const auto model = kmeans(corpus.embeddings, k.value_or(config_.k_for(kind)), seed.value_or(config_.cluster_seed));
    auto report = summarize_clusters(model, corpus, config_.n_representatives, config_.n_top_terms);
    std::lock_guard lock(files_mu_);
    write_json_file(corpus, corpus_path(kind));
    write_json_file(model, reports_dir() / ("cluster-model-" + std::string(to_string(kind)) + ".json"));
    write_json_file(report, clusters_path(kind));
    return report;
}

std::optional<GroupReport> Workspace::clusters(TargetKind kind) const {
    std::lock_guard lock(files_mu_);
    if (!std::filesystem::exists(clusters_path(kind))) return std::nullopt;
    return group_report_from_json(read_json_file(clusters_path(kind)));
}

GroupReport Workspace::regroup(TargetKind kind, const RegroupPlan& plan) {
    std::lock_guard lock(files_mu_);
    if (!std::filesystem::exists(clusters_path(kind))) {
        throw ValidationError("no cluster report for " + std::string(to_string(kind)) + "; run cluster first");
    }
    const auto current = group_report_from_json(read_json_file(clusters_path(kind)));
    const auto corpus = feedback_corpus_from_json(read_json_file(corpus_path(kind)));
    auto next = sysfb::regroup(current, corpus, plan, config_.n_representatives, config_.n_top_terms);
    write_json_file(next, clusters_path(kind));
    return next;
}

CheckerCalibration Workspace::calibrate(TargetKind kind, const std::optional<std::filesystem::path>& validation) {
    const auto recs = validation ? load_records(*validation, kind) : records(kind);
    if (recs.empty()) throw DomainError("no " + std::string(to_string(kind)) + " records to calibrate on");
    std::vector<std::pair<double, bool>> scored(recs.size());
    parallel_for(recs.size(), config_.parallelism, [&](std::size_t i) {
        scored[i] = {checker_->score(recs[i].context, recs[i].original_text, kind), recs[i].satisfied};
    });
    auto cal = calibrate_threshold(scored, config_.target_precision);
    std::lock_guard lock(files_mu_);
    write_json_file(cal, calibration_path(kind));
    return cal;
}

std::optional<CheckerCalibration> Workspace::calibration(TargetKind kind) const {
    std::lock_guard lock(files_mu_);
    if (!std::filesystem::exists(calibration_path(kind))) return std::nullopt;
    return checker_calibration_from_json(read_json_file(calibration_path(kind)));
}

CriteriaSet Workspace::criteria_set(const std::string& id) const {
    auto stored = criteria_->get(id);
    if (!stored) throw ValidationError("unknown criteria set \"" + id + "\"");
    return stored->set;
}

EvalResources Workspace::eval_resources(TargetKind kind, bool with_satisfaction) {
    EvalResources res;
    res.frequency_table = frequency_table_ ? &*frequency_table_ : nullptr;
    res.C = config_.C;
    res.judge = judge_.get();
    if (with_satisfaction) {
        res.checker = checker_.get();
        res.calibration = calibration(kind);
        if (!res.calibration) res.calibration = calibrate(kind);
    }
    return res;
}

BuildOutput Workspace::build_dataset(const BuildRequest& request) {
    RunLock lock(lock_path(), false);
    const auto criteria = criteria_set(request.criteria_id);
    const auto kind = criteria.target_kind;
    BuildOutput out;
    auto cal = calibration(kind);
    if (!cal) {
        cal = calibrate(kind);
        out.calibrated_now = true;
    }
    BuildOptions opts;
    opts.n_satisfied = request.n_satisfied;
    opts.n_unsatisfied = request.n_unsatisfied;
    opts.seed = request.seed.value_or(config_.sample_seed);
    opts.parallelism = config_.parallelism;
    opts.feedback_model = feedback_.get();
    out.result = build_training_dataset(records(), criteria, request.feedback_mode, *refiner_, *checker_, *cal, opts);

    const auto& id = out.result.run.id;
    out.dataset_path = datasets_dir() / (id + ".jsonl");
    out.refinements_path = datasets_dir() / (id + ".refinements.jsonl");
    out.log_path = logs_dir() / (id + ".jsonl");
    out.manifest_path = datasets_dir() / (id + ".manifest.json");
    save_dataset(out.result.dataset, out.dataset_path);
    save_refinements(out.result.refinements, out.refinements_path);
    std::vector<json> log_rows(out.result.log.begin(), out.result.log.end());
    write_jsonl(log_rows, out.log_path);
    ManifestInputs inputs{out.dataset_path, out.refinements_path, out.log_path, criteria};
    emit_training_manifest(out.result.run, inputs, out.manifest_path);
    save_report(id, training_manifest(out.result.run, inputs));
    return out;
}

AblationResult Workspace::ablate(TargetKind kind, const AblationRequest& request) {
    if (request.criteria_ids.size() < 2) throw ValidationError("an ablation needs at least two criteria ids");
    RunLock lock(lock_path(), request.wait_for_lock);
    std::vector<CriteriaSet> variants;
    for (const auto& id : request.criteria_ids) {
        variants.push_back(criteria_set(id));
        if (variants.back().target_kind != kind) {
            throw ValidationError("criteria set \"" + id + "\" is for " + std::string(to_string(variants.back().target_kind)) +
                                  ", not " + std::string(to_string(kind)));
        }
    }
    std::vector<FeedbackRecord> unsatisfied;
    for (auto& r : records(kind)) {
        if (!r.satisfied) unsatisfied.push_back(std::move(r));
    }
    if (unsatisfied.empty()) throw DomainError("no unsatisfied " + std::string(to_string(kind)) + " records to refine");
    auto resources = eval_resources(kind, true);
    AblationOptions opts;
    opts.sample_size = request.sample_size;
    opts.seed = request.seed.value_or(config_.sample_seed);
    opts.parallelism = config_.parallelism;
    opts.search = search_.get();
    opts.id = request.id;
    auto result = run_ablation(variants, unsatisfied, *refiner_, resources, opts);
    save_report(result.id, result);
    return result;
}

MetricReport Workspace::evaluate_refinements(Suite suite, const std::vector<RefinementRecord>& refinements,
                                             bool with_satisfaction) {
    if (suite == Suite::feedback) return characterize_feedback(refinements);
    if (refinements.empty()) throw DomainError("no refinements to evaluate");
    const auto kind = suite == Suite::query ? TargetKind::query : TargetKind::response;
    std::map<std::string, FeedbackRecord> by_id;
    for (auto& r : records(kind)) by_id.emplace(r.id, std::move(r));

    std::vector<std::string> keys(refinements.size());
    std::set<std::string> sources;
    bool duplicate = false;
    for (const auto& r : refinements) duplicate |= !sources.insert(r.source).second;
    for (std::size_t i = 0; i < refinements.size(); ++i) {
        const auto& r = refinements[i];
        if (!by_id.count(r.source)) {
            throw ValidationError("refinement source \"" + r.source + "\" is not an ingested " +
                                  std::string(to_string(kind)) + " record");
        }
        keys[i] = duplicate ? r.source + "@" + r.criteria_id : r.source;
    }
    auto resources = eval_resources(kind, with_satisfaction);
    std::vector<std::map<std::string, double>> values(refinements.size());
    parallel_for(refinements.size(), config_.parallelism, [&](std::size_t i) {
        const auto& ref = refinements[i];
        const auto& rec = by_id.at(ref.source);
        const auto docs = rec.search_documents.value_or(std::vector<SearchDocument>{});
        values[i] = kind == TargetKind::query ? evaluate_query_item(rec.context, ref.refined_text, resources).values
                                              : evaluate_response_item(rec.context, ref.refined_text, docs, resources).values;
    });
    PerItem per_item;
    for (std::size_t i = 0; i < refinements.size(); ++i) {
        if (!per_item.emplace(keys[i], values[i]).second) throw ValidationError("duplicate refinement " + keys[i]);
    }
    return make_report(suite, std::move(per_item), config_.C);
}

MetricReport Workspace::characterize_feedback(const std::vector<RefinementRecord>& refinements) {
    std::vector<FeedbackSample> samples;
    for (const auto& r : refinements) {
        if (r.instance_feedback) samples.push_back(FeedbackSample{r.source, *r.instance_feedback, r.accepted});
    }
    if (samples.empty()) throw DomainError("no refinement carries instance feedback");
    return feedback_characterization(samples, *grammar_);
}

std::string Workspace::render_prompt(const RenderRequest& request) const {
    FeedbackRecord record;
    if (request.record) {
        record = *request.record;
    } else {
        const auto recs = records(request.kind);
        const FeedbackRecord* found = nullptr;
        for (const auto& r : recs) {
            if (request.record_id ? r.id == *request.record_id : !r.satisfied) {
                found = &r;
                break;
            }
        }
        if (!found) {
            throw ValidationError(request.record_id ? "unknown record \"" + *request.record_id + "\""
                                                    : std::string("no unsatisfied record to preview with"));
        }
        record = *found;
    }
    if (record.target_kind != request.kind) throw ValidationError("record kind does not match the requested kind");
    CriteriaSet set{"preview", request.kind, request.criteria, ""};
    return refinement_prompt(record, set, request.feedback);
}

std::optional<json> Workspace::report(const std::string& id) const {
    if (!is_safe_id(id)) return std::nullopt;
    const auto path = reports_dir() / (id + ".json");
    std::lock_guard lock(files_mu_);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_json_file(path);
}

std::filesystem::path Workspace::save_report(const std::string& id, const json& body) const {
    if (!is_safe_id(id)) throw ValidationError("unsafe report id \"" + id + "\"");
    const auto path = reports_dir() / (id + ".json");
    std::lock_guard lock(files_mu_);
    write_json_file(body, path);
    return path;
}

std::optional<std::vector<json>> Workspace::run_log(const std::string& id) const {
    if (!is_safe_id(id)) return std::nullopt;
    const auto path = logs_dir() / (id + ".jsonl");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_jsonl(path);
}

}  // namespace sysfb
