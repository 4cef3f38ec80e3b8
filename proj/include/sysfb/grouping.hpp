#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sysfb/data_model.hpp"
#include "sysfb/embedding.hpp"
#include "sysfb/kmeans.hpp"

namespace sysfb {

/// Feedback texts of one target kind with their embeddings, row-aligned.
struct FeedbackCorpus {
    TargetKind kind = TargetKind::query;
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    std::vector<EmbeddingVector> embeddings;

    std::size_t size() const { return ids.size(); }
    bool operator==(const FeedbackCorpus&) const = default;
};

/// Unsatisfied records of `kind` carrying feedback, embedded in file order.
/// An unsatisfied record without feedback text is a ValidationError.
FeedbackCorpus build_corpus(const std::vector<FeedbackRecord>& records, TargetKind kind, EmbeddingProvider& provider);

struct FeedbackGroup {
    std::string label;
    std::set<std::size_t> member_clusters;
    std::size_t count = 0;
    double percentage = 0.0;
    std::vector<std::string> representatives;
    std::vector<std::string> top_terms;
    std::vector<std::string> member_ids;
    bool operator==(const FeedbackGroup&) const = default;
};

struct GroupReport {
    TargetKind kind = TargetKind::query;
    std::size_t total = 0;
    std::size_t n_clusters = 0;
    std::vector<FeedbackGroup> groups;
    /// record id -> cluster index
    std::map<std::string, std::size_t> assignment;
    bool operator==(const GroupReport&) const = default;
};

/// count / total * 100.
std::vector<double> percentages(const std::vector<std::size_t>& counts);

/// One group per cluster, labelled "cluster <i>". Representatives are the
/// member texts nearest the cluster mean; top terms rank by TF-IDF where tf
/// is taken over the cluster's tokens and idf over all corpus texts.
GroupReport summarize_clusters(const ClusterModel& model, const FeedbackCorpus& corpus, std::size_t n_reps = 3,
                               std::size_t n_terms = 5);

struct SplitDirective {
    std::size_t cluster = 0;
    std::size_t parts = 2;
    std::uint64_t seed = 0;
};

/// Human regrouping directives. Splits run first: cluster c keeps part 0
/// and parts 1.. get fresh indices after the current last cluster, in
/// directive order. `groups` must then cover every cluster index once.
struct RegroupPlan {
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::string> labels;
    std::vector<SplitDirective> splits;
};

GroupReport regroup(const GroupReport& report, const FeedbackCorpus& corpus, const RegroupPlan& plan,
                    std::size_t n_reps = 3, std::size_t n_terms = 5);

void to_json(json& j, const FeedbackCorpus& c);
void to_json(json& j, const FeedbackGroup& g);
void to_json(json& j, const GroupReport& r);
void to_json(json& j, const ClusterModel& m);
FeedbackCorpus feedback_corpus_from_json(const json& j);
GroupReport group_report_from_json(const json& j);
RegroupPlan regroup_plan_from_json(const json& j);

}  // namespace sysfb
