#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sysfb/config.hpp"
#include "sysfb/criteria_store.hpp"
#include "sysfb/embedding.hpp"
#include "sysfb/gateway.hpp"
#include "sysfb/grouping.hpp"
#include "sysfb/metrics.hpp"
#include "sysfb/pipeline.hpp"
#include "sysfb/quality_checker.hpp"

namespace sysfb {

/// Exclusive advisory lock on the run directory's job lock file, held for
/// the object's lifetime.
class RunLock {
public:
    RunLock(const std::filesystem::path& path, bool wait);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    int fd_ = -1;
};

struct IngestSummary {
    std::size_t total = 0;
    std::size_t query = 0;
    std::size_t response = 0;
    std::size_t satisfied = 0;
    std::size_t unsatisfied = 0;
    std::filesystem::path path;
};

struct BuildOutput {
    BuildResult result;
    std::filesystem::path dataset_path;
    std::filesystem::path refinements_path;
    std::filesystem::path log_path;
    std::filesystem::path manifest_path;
    bool calibrated_now = false;
};

struct BuildRequest {
    std::string criteria_id;
    FeedbackMode feedback_mode = FeedbackMode::none;
    std::size_t n_satisfied = 1000;
    std::size_t n_unsatisfied = 1000;
    std::optional<std::uint64_t> seed;
};

struct AblationRequest {
    std::vector<std::string> criteria_ids;
    std::size_t sample_size = 0;
    std::optional<std::uint64_t> seed;
    std::string id;
    /// Block until the run lock is free instead of failing with ConflictError.
    bool wait_for_lock = false;
};

struct RenderRequest {
    TargetKind kind = TargetKind::query;
    std::vector<std::string> criteria;
    std::optional<std::string> record_id;
    std::optional<FeedbackRecord> record;
    std::optional<std::string> feedback;
};

/// A run directory plus every client its config describes. All pipeline
/// operations used by the CLI and the HTTP API live here.
///
/// Layout: config.toml, data/records.jsonl, cache/, criteria/, datasets/,
/// reports/, logs/.
class Workspace {
public:
    explicit Workspace(RunConfig config, std::shared_ptr<HttpTransport> transport = nullptr);

    const RunConfig& config() const { return config_; }
    const std::filesystem::path& run_dir() const { return config_.run_dir; }
    std::filesystem::path records_path() const { return run_dir() / "data" / "records.jsonl"; }
    std::filesystem::path reports_dir() const { return run_dir() / "reports"; }
    std::filesystem::path datasets_dir() const { return run_dir() / "datasets"; }
    std::filesystem::path logs_dir() const { return run_dir() / "logs"; }
    std::filesystem::path lock_path() const { return run_dir() / "logs" / "job.lock"; }

    Gateway& refiner() { return *refiner_; }
    Gateway& judge() { return *judge_; }
    Gateway& feedback_model() { return *feedback_; }
    QualityChecker& checker() { return *checker_; }
    CriteriaStore& criteria() { return *criteria_; }

    /// All endpoint URLs that must be reachable for model-bound jobs.
    std::vector<std::string> remote_endpoints() const;
    /// Throws TransportError naming the first unreachable remote endpoint.
    void check_endpoints() const;

    IngestSummary ingest(const std::filesystem::path& input);
    std::vector<FeedbackRecord> records() const;
    std::vector<FeedbackRecord> records(TargetKind kind) const;

    GroupReport cluster(TargetKind kind, std::optional<std::size_t> k, std::optional<std::uint64_t> seed);
    std::optional<GroupReport> clusters(TargetKind kind) const;
    GroupReport regroup(TargetKind kind, const RegroupPlan& plan);

    CheckerCalibration calibrate(TargetKind kind, const std::optional<std::filesystem::path>& validation = std::nullopt);
    std::optional<CheckerCalibration> calibration(TargetKind kind) const;

    CriteriaSet criteria_set(const std::string& id) const;

    BuildOutput build_dataset(const BuildRequest& request);
    AblationResult ablate(TargetKind kind, const AblationRequest& request);

    /// Scores refinements (joined to ingested records by source id).
    MetricReport evaluate_refinements(Suite suite, const std::vector<RefinementRecord>& refinements,
                                      bool with_satisfaction = true);
    MetricReport characterize_feedback(const std::vector<RefinementRecord>& refinements);

    std::string render_prompt(const RenderRequest& request) const;

    /// reports/<id>.json
    std::optional<json> report(const std::string& id) const;
    std::filesystem::path save_report(const std::string& id, const json& body) const;
    /// logs/<id>.jsonl
    std::optional<std::vector<json>> run_log(const std::string& id) const;

private:
    std::filesystem::path clusters_path(TargetKind kind) const;
    std::filesystem::path corpus_path(TargetKind kind) const;
    std::filesystem::path calibration_path(TargetKind kind) const;
    EvalResources eval_resources(TargetKind kind, bool with_satisfaction);
    std::shared_ptr<Gateway> make_gateway(const EndpointConfig& e, const std::string& role);

    RunConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<Gateway> refiner_;
    std::shared_ptr<Gateway> judge_;
    std::shared_ptr<Gateway> feedback_;
    std::shared_ptr<QualityChecker> checker_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    std::shared_ptr<SearchCountClient> search_;
    std::shared_ptr<GrammarChecker> grammar_;
    std::optional<WordFrequencyTable> frequency_table_;
    std::unique_ptr<CriteriaStore> criteria_;
    mutable std::mutex files_mu_;
};

/// Ids used in file names: [A-Za-z0-9_.-], not starting with '.'.
bool is_safe_id(const std::string& id);

}  // namespace sysfb
