#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sysfb/data_model.hpp"
#include "sysfb/gateway.hpp"
#include "sysfb/metrics.hpp"
#include "sysfb/quality_checker.hpp"

namespace sysfb {

enum class FeedbackMode { none, human, model };
std::string_view to_string(FeedbackMode m);
FeedbackMode parse_feedback_mode(std::string_view s);

struct PipelineRun {
    std::string id;
    std::string criteria_id;
    FeedbackMode feedback_mode = FeedbackMode::none;
    std::size_t satisfied_passthrough = 0;
    std::size_t refined_accepted = 0;
    std::size_t refined_discarded = 0;
    /// Unsatisfied records that could not be attempted (e.g. no human feedback).
    std::size_t skipped = 0;
    std::uint64_t seed = 0;
    bool operator==(const PipelineRun&) const = default;
};

struct RunLogEntry {
    std::string id;
    std::string outcome;  // passthrough | accepted | discarded | skipped
    std::string reason;
    bool operator==(const RunLogEntry&) const = default;
};

struct BuildResult {
    std::vector<TrainingExample> dataset;
    PipelineRun run;
    std::vector<RefinementRecord> refinements;
    std::vector<RunLogEntry> log;
};

/// Uniform sample of min(n, pool) distinct indices in [0, pool) via a partial
/// Fisher-Yates shuffle driven directly by the engine (rejection sampling for
/// bounded draws), so results are identical across standard libraries.
std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t n, std::mt19937_64& rng);

struct BuildOptions {
    std::size_t n_satisfied = 1000;
    std::size_t n_unsatisfied = 1000;
    std::uint64_t seed = 0;
    std::size_t parallelism = 4;
    /// Needed when the feedback mode is `model`.
    Gateway* feedback_model = nullptr;
    /// Defaults to a hash of the inputs.
    std::string run_id;
};

/// Builds the training set from records of the criteria's target kind:
/// sampled satisfied records pass through; sampled unsatisfied records are
/// refined once and kept only when the checker accepts the refinement.
/// Output rows (dataset, refinements, log) are ordered by record id.
BuildResult build_training_dataset(const std::vector<FeedbackRecord>& records, const CriteriaSet& criteria,
                                   FeedbackMode feedback_mode, Gateway& refiner, QualityChecker& checker,
                                   const CheckerCalibration& calibration, const BuildOptions& options);

struct AblationRow {
    std::string criteria_id;
    std::string label;
    MetricReport report;
};

struct AblationResult {
    std::string id;
    TargetKind kind = TargetKind::query;
    std::vector<AblationRow> rows;
    std::vector<std::string> sample_ids;
    /// id -> reason, for items dropped from every variant.
    std::map<std::string, std::string> dropped;
};

struct AblationOptions {
    std::size_t sample_size = 0;  // 0 = every record given
    std::uint64_t seed = 0;
    std::size_t parallelism = 4;
    SearchCountClient* search = nullptr;
    std::string id;
};

/// Refines every sampled record under each criteria variant and scores the
/// refinements. Items that fail under any variant are dropped from all.
/// Coverage compares page counts of the variants' refinements per record.
AblationResult run_ablation(const std::vector<CriteriaSet>& variants, const std::vector<FeedbackRecord>& records,
                            Gateway& refiner, const EvalResources& resources, const AblationOptions& options);

/// Refines one record; returns the trimmed completion.
std::string refine(const FeedbackRecord& record, const CriteriaSet& criteria,
                   const std::optional<std::string>& feedback, Gateway& refiner);

struct ManifestInputs {
    std::filesystem::path dataset_path;
    std::filesystem::path refinements_path;
    std::filesystem::path log_path;
    CriteriaSet criteria;
};

json training_manifest(const PipelineRun& run, const ManifestInputs& inputs);
void emit_training_manifest(const PipelineRun& run, const ManifestInputs& inputs, const std::filesystem::path& path);

/// Runs fn(i) for i in [0, n) on up to `parallelism` threads. The first
/// exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

void to_json(json& j, const PipelineRun& r);
void to_json(json& j, const RunLogEntry& e);
void to_json(json& j, const AblationResult& a);
PipelineRun pipeline_run_from_json(const json& j);
RunLogEntry run_log_entry_from_json(const json& j);
AblationResult ablation_result_from_json(const json& j);

}  // namespace sysfb
