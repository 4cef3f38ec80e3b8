#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sysfb/data_model.hpp"
#include "sysfb/gateway.hpp"
#include "sysfb/quality_checker.hpp"

// Scripted refiner/checker pair plus a straight-line re-derivation of the
// dataset build, used to check build_training_dataset record by record.
namespace sysfb::test::oracle {

/// 100 query records: q-ids shuffled, 30 satisfied, 70 unsatisfied; of the
/// unsatisfied, 40 originals contain the letter q, 5 contain "blank".
std::vector<FeedbackRecord> scripted_pipeline_records(std::uint64_t seed);

/// Refiner: uppercases the original pulled out of the prompt; originals
/// containing "blank" come back as whitespace.
std::shared_ptr<CompletionClient> uppercasing_refiner();
/// Checker: 0.9 when the text contains 'Q', else 0.1.
std::shared_ptr<ScoreClient> q_checker();
/// Threshold 0.5, qualified.
CheckerCalibration half_calibration();

struct BuildExpectation {
    std::vector<std::string> dataset_lines;
    std::vector<std::string> log_lines;
    std::size_t passthrough = 0;
    std::size_t accepted = 0;
    std::size_t discarded = 0;
};

/// Sampling is the documented partial Fisher-Yates with rejection-sampled
/// bounded draws from one mt19937_64 seeded with `seed`: satisfied pool
/// first, then unsatisfied, each in file order.
BuildExpectation expected_build(const std::vector<FeedbackRecord>& records, TargetKind kind, std::size_t n_satisfied,
                                std::size_t n_unsatisfied, std::uint64_t seed);

}  // namespace sysfb::test::oracle
