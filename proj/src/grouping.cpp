#include "sysfb/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "json_fields.hpp"
#include "sysfb/errors.hpp"
#include "sysfb/text_analysis.hpp"

namespace sysfb {
using namespace detail;
namespace {

std::string join_indices(const std::vector<std::size_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(xs[i]);
    }
    return out;
}

struct Idf {
    std::unordered_map<std::string, double> weight;
};

Idf corpus_idf(const FeedbackCorpus& corpus) {
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& text : corpus.texts) {
        auto toks = tokenize(text);
        std::unordered_set<std::string> seen(toks.begin(), toks.end());
        for (const auto& t : seen) ++df[t];
    }
    Idf idf;
    const double n = static_cast<double>(corpus.size());
    for (const auto& [term, d] : df) idf.weight[term] = std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0;
    return idf;
}

std::vector<std::string> top_terms(const std::vector<std::size_t>& rows, const FeedbackCorpus& corpus, const Idf& idf,
                                   std::size_t n_terms) {
    std::map<std::string, std::size_t> tf;
    std::size_t total = 0;
    for (auto r : rows) {
        for (auto& t : tokenize(corpus.texts[r])) {
            ++tf[t];
            ++total;
        }
    }
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [term, count] : tf) {
        scored.emplace_back(static_cast<double>(count) / static_cast<double>(total) * idf.weight.at(term), term);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < n_terms; ++i) out.push_back(scored[i].second);
    return out;
}

std::vector<std::string> representatives(const std::vector<std::size_t>& rows, const FeedbackCorpus& corpus,
                                         std::size_t n_reps) {
    const auto center = mean_vector(corpus.embeddings, rows);
    std::vector<std::pair<double, std::size_t>> by_distance;
    for (auto r : rows) by_distance.emplace_back(squared_distance(corpus.embeddings[r], center), r);
    std::sort(by_distance.begin(), by_distance.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return corpus.ids[a.second] < corpus.ids[b.second];
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < by_distance.size() && i < n_reps; ++i) out.push_back(corpus.texts[by_distance[i].second]);
    return out;
}

// Builds a report from a row -> cluster labeling and a cluster -> group mapping.
GroupReport assemble(const FeedbackCorpus& corpus, const std::vector<std::size_t>& cluster_of_row,
                     std::size_t n_clusters, const std::vector<std::vector<std::size_t>>& groups,
                     const std::vector<std::string>& labels, std::size_t n_reps, std::size_t n_terms) {
    GroupReport report;
    report.kind = corpus.kind;
    report.total = corpus.size();
    report.n_clusters = n_clusters;
    for (std::size_t r = 0; r < corpus.size(); ++r) report.assignment[corpus.ids[r]] = cluster_of_row[r];

    std::vector<std::size_t> group_of_cluster(n_clusters);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (auto c : groups[g]) group_of_cluster[c] = g;
    }
    std::vector<std::vector<std::size_t>> rows(groups.size());
    for (std::size_t r = 0; r < corpus.size(); ++r) rows[group_of_cluster[cluster_of_row[r]]].push_back(r);

    std::vector<std::size_t> counts;
    for (const auto& rs : rows) counts.push_back(rs.size());
    const auto pct = percentages(counts);
    const auto idf = corpus_idf(corpus);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        FeedbackGroup group;
        group.label = labels[g];
        group.member_clusters.insert(groups[g].begin(), groups[g].end());
        group.count = counts[g];
        group.percentage = pct[g];
        if (!rows[g].empty()) {
            group.representatives = representatives(rows[g], corpus, n_reps);
            group.top_terms = top_terms(rows[g], corpus, idf, n_terms);
        }
        for (auto r : rows[g]) group.member_ids.push_back(corpus.ids[r]);
        report.groups.push_back(std::move(group));
    }
    return report;
}

}  // namespace

FeedbackCorpus build_corpus(const std::vector<FeedbackRecord>& records, TargetKind kind, EmbeddingProvider& provider) {
    FeedbackCorpus corpus;
    corpus.kind = kind;
    for (const auto& r : records) {
        if (r.target_kind != kind || r.satisfied) continue;
        if (!r.feedback_text || trim(*r.feedback_text).empty()) {
            throw ValidationError("record " + r.id + " is unsatisfied but has no feedback_text");
        }
        corpus.ids.push_back(r.id);
        corpus.texts.push_back(*r.feedback_text);
    }
    corpus.embeddings = embed_batch(corpus.texts, provider);
    return corpus;
}

std::vector<double> percentages(const std::vector<std::size_t>& counts) {
    const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    std::vector<double> out;
    for (auto c : counts) out.push_back(total ? static_cast<double>(c) * 100.0 / static_cast<double>(total) : 0.0);
    return out;
}

GroupReport summarize_clusters(const ClusterModel& model, const FeedbackCorpus& corpus, std::size_t n_reps,
                               std::size_t n_terms) {
    if (model.assignment.size() != corpus.size()) {
        throw ValidationError("cluster model covers " + std::to_string(model.assignment.size()) +
                              " points but the corpus has " + std::to_string(corpus.size()));
    }
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < model.k; ++c) {
        groups.push_back({c});
        labels.push_back("cluster " + std::to_string(c));
    }
    return assemble(corpus, model.assignment, model.k, groups, labels, n_reps, n_terms);
}

GroupReport regroup(const GroupReport& report, const FeedbackCorpus& corpus, const RegroupPlan& plan,
                    std::size_t n_reps, std::size_t n_terms) {
    std::vector<std::size_t> cluster_of_row(corpus.size());
    for (std::size_t r = 0; r < corpus.size(); ++r) {
        auto it = report.assignment.find(corpus.ids[r]);
        if (it == report.assignment.end()) throw ValidationError("record " + corpus.ids[r] + " is not in the report");
        cluster_of_row[r] = it->second;
    }
    std::size_t n_clusters = report.n_clusters;

    for (const auto& split : plan.splits) {
        if (split.cluster >= n_clusters) {
            throw ValidationError("split names unknown cluster index " + std::to_string(split.cluster));
        }
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < corpus.size(); ++r) {
            if (cluster_of_row[r] == split.cluster) rows.push_back(r);
        }
        if (split.parts < 2 || split.parts > rows.size()) {
            throw ValidationError("cannot split cluster " + std::to_string(split.cluster) + " of size " +
                                  std::to_string(rows.size()) + " into " + std::to_string(split.parts) + " parts");
        }
        std::vector<EmbeddingVector> sub;
        for (auto r : rows) sub.push_back(corpus.embeddings[r]);
        const auto model = kmeans(sub, split.parts, split.seed);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto part = model.assignment[i];
            cluster_of_row[rows[i]] = part == 0 ? split.cluster : n_clusters + part - 1;
        }
        n_clusters += split.parts - 1;
    }

    std::vector<std::size_t> seen(n_clusters, 0);
    std::vector<std::size_t> unknown;
    for (const auto& g : plan.groups) {
        for (auto c : g) {
            if (c >= n_clusters) {
                unknown.push_back(c);
            } else {
                ++seen[c];
            }
        }
    }
    std::vector<std::size_t> missing, duplicated;
    for (std::size_t c = 0; c < n_clusters; ++c) {
        if (seen[c] == 0) missing.push_back(c);
        if (seen[c] > 1) duplicated.push_back(c);
    }
    if (!unknown.empty() || !missing.empty() || !duplicated.empty()) {
        std::string msg = "invalid regroup mapping:";
        if (!missing.empty()) msg += " missing cluster indices [" + join_indices(missing) + "]";
        if (!duplicated.empty()) msg += " duplicated cluster indices [" + join_indices(duplicated) + "]";
        if (!unknown.empty()) msg += " unknown cluster indices [" + join_indices(unknown) + "]";
        throw ValidationError(msg);
    }
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
        if (plan.groups[g].empty()) throw ValidationError("group " + std::to_string(g) + " has no clusters");
    }
    if (!plan.labels.empty() && plan.labels.size() != plan.groups.size()) {
        throw ValidationError("got " + std::to_string(plan.labels.size()) + " labels for " +
                              std::to_string(plan.groups.size()) + " groups");
    }
    auto labels = plan.labels;
    if (labels.empty()) {
        for (std::size_t g = 0; g < plan.groups.size(); ++g) labels.push_back("group " + std::to_string(g));
    }
    return assemble(corpus, cluster_of_row, n_clusters, plan.groups, labels, n_reps, n_terms);
}

void to_json(json& j, const FeedbackCorpus& c) {
    j = json{{"kind", to_string(c.kind)}, {"ids", c.ids}, {"texts", c.texts}, {"embeddings", c.embeddings}};
}

void to_json(json& j, const FeedbackGroup& g) {
    j = json{{"label", g.label},
             {"member_cluster_indices", g.member_clusters},
             {"count", g.count},
             {"percentage", g.percentage},
             {"representatives", g.representatives},
             {"top_terms", g.top_terms},
             {"member_ids", g.member_ids}};
}

void to_json(json& j, const GroupReport& r) {
    j = json{{"kind", to_string(r.kind)},
             {"total", r.total},
             {"n_clusters", r.n_clusters},
             {"groups", r.groups},
             {"assignment", r.assignment}};
}

void to_json(json& j, const ClusterModel& m) {
    j = json{{"k", m.k},
             {"seed", m.seed},
             {"iterations_run", m.iterations_run},
             {"centroids", m.centroids},
             {"assignment", m.assignment},
             {"distortion_trace", m.distortion_trace}};
}

namespace {

std::vector<std::string> string_list(const json& j, const char* field) {
    std::vector<std::string> out;
    for (const auto& v : require_array(j, field)) {
        if (!v.is_string()) throw ValidationError(std::string("field \"") + field + "\" must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::vector<std::size_t> index_list(const json& j, const char* what) {
    if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array of cluster indices");
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ValidationError(std::string(what) + " must hold non-negative integers");
        }
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

}  // namespace

FeedbackCorpus feedback_corpus_from_json(const json& j) {
    FeedbackCorpus c;
    c.kind = parse_target_kind(require_string(j, "kind"));
    c.ids = string_list(j, "ids");
    c.texts = string_list(j, "texts");
    for (const auto& row : require_array(j, "embeddings")) c.embeddings.push_back(row.get<EmbeddingVector>());
    if (c.texts.size() != c.ids.size() || c.embeddings.size() != c.ids.size()) {
        throw ValidationError("corpus arrays differ in length");
    }
    return c;
}

GroupReport group_report_from_json(const json& j) {
    GroupReport r;
    r.kind = parse_target_kind(require_string(j, "kind"));
    r.total = require_count(j, "total");
    r.n_clusters = require_count(j, "n_clusters");
    for (const auto& g : require_array(j, "groups")) {
        FeedbackGroup group;
        group.label = require_string(g, "label");
        for (auto c : index_list(require(g, "member_cluster_indices"), "member_cluster_indices")) {
            group.member_clusters.insert(c);
        }
        group.count = require_count(g, "count");
        group.percentage = require_number(g, "percentage");
        group.representatives = string_list(g, "representatives");
        group.top_terms = string_list(g, "top_terms");
        group.member_ids = string_list(g, "member_ids");
        r.groups.push_back(std::move(group));
    }
    const auto& a = require(j, "assignment");
    if (!a.is_object()) throw ValidationError("field \"assignment\" must be an object");
    for (const auto& [id, c] : a.items()) r.assignment[id] = c.get<std::size_t>();
    return r;
}

RegroupPlan regroup_plan_from_json(const json& j) {
    RegroupPlan plan;
    for (const auto& g : require_array(j, "groups")) plan.groups.push_back(index_list(g, "groups entry"));
    if (j.contains("labels")) plan.labels = string_list(j, "labels");
    if (j.contains("splits")) {
        for (const auto& s : require_array(j, "splits")) {
            SplitDirective d;
            d.cluster = require_count(s, "cluster");
            d.parts = require_count(s, "parts");
            if (s.contains("seed")) d.seed = require_count(s, "seed");
            plan.splits.push_back(d);
        }
    }
    return plan;
}

}  // namespace sysfb
