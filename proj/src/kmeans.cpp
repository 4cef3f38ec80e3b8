#include "sysfb/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "sysfb/errors.hpp"

namespace sysfb {
namespace {

std::size_t nearest(const EmbeddingVector& v, const std::vector<EmbeddingVector>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(v, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

double distortion(const std::vector<EmbeddingVector>& vectors, const std::vector<EmbeddingVector>& centroids,
                  const std::vector<std::size_t>& assignment) {
    double total = 0.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) total += squared_distance(vectors[i], centroids[assignment[i]]);
    return total;
}

// Uniform double in [0,1) straight from the engine, so results do not depend
// on the standard library's distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<EmbeddingVector> seed_plus_plus(const std::vector<EmbeddingVector>& vectors, std::size_t k,
                                            std::mt19937_64& rng) {
    const auto n = vectors.size();
    std::vector<EmbeddingVector> centroids;
    centroids.push_back(vectors[rng() % n]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(vectors[i], centroids[0]);
    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng() % n;  // all remaining mass is zero: any point will do
        } else {
            double target = unit(rng) * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= d2[i];
                if (target < 0.0 && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(vectors[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(vectors[i], centroids.back()));
    }
    return centroids;
}

// Moves points into empty clusters until none is empty. Each donor point is
// the one farthest from its centroid among clusters that can spare one.
void repair_empty(const std::vector<EmbeddingVector>& vectors, std::vector<EmbeddingVector>& centroids,
                  std::vector<std::size_t>& assignment) {
    const auto k = centroids.size();
    for (;;) {
        std::vector<std::size_t> sizes(k, 0);
        for (auto a : assignment) ++sizes[a];
        std::size_t empty = k;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) {
                empty = c;
                break;
            }
        }
        if (empty == k) return;
        std::size_t donor = vectors.size();
        double far = -1.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (sizes[assignment[i]] < 2) continue;
            const double d = squared_distance(vectors[i], centroids[assignment[i]]);
            if (d > far) {
                far = d;
                donor = i;
            }
        }
        if (donor == vectors.size()) return;  // unreachable while k <= n
        assignment[donor] = empty;
        centroids[empty] = vectors[donor];
    }
}

}  // namespace

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignment) ++sizes[a];
    return sizes;
}

double squared_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

EmbeddingVector mean_vector(const std::vector<EmbeddingVector>& vectors, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw DomainError("mean of zero vectors");
    EmbeddingVector m(vectors[rows.front()].size(), 0.0);
    for (auto r : rows) {
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += vectors[r][j];
    }
    for (double& x : m) x /= static_cast<double>(rows.size());
    return m;
}

ClusterModel kmeans(const std::vector<EmbeddingVector>& vectors, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
    if (k == 0) throw DomainError("k must be at least 1");
    if (k > vectors.size()) {
        throw DomainError("k = " + std::to_string(k) + " exceeds the number of points (" +
                          std::to_string(vectors.size()) + ")");
    }
    const auto dim = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != dim) throw DomainError("vectors differ in dimension");
        for (double x : v) {
            if (!std::isfinite(x)) throw DomainError("non-finite embedding value");
        }
    }

    std::mt19937_64 rng(seed);
    ClusterModel model;
    model.k = k;
    model.seed = seed;
    model.centroids = seed_plus_plus(vectors, k, rng);
    model.assignment.resize(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) model.assignment[i] = nearest(vectors[i], model.centroids);
    repair_empty(vectors, model.centroids, model.assignment);
    model.distortion_trace.push_back(distortion(vectors, model.centroids, model.assignment));

    for (std::size_t it = 0; it < max_iterations; ++it) {
        std::vector<std::vector<std::size_t>> members(k);
        for (std::size_t i = 0; i < vectors.size(); ++i) members[model.assignment[i]].push_back(i);
        for (std::size_t c = 0; c < k; ++c) model.centroids[c] = mean_vector(vectors, members[c]);

        auto next = model.assignment;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            // Keep the current cluster on ties so the loop cannot oscillate.
            const auto cur = model.assignment[i];
            const auto cand = nearest(vectors[i], model.centroids);
            if (squared_distance(vectors[i], model.centroids[cand]) <
                squared_distance(vectors[i], model.centroids[cur])) {
                next[i] = cand;
            }
        }
        repair_empty(vectors, model.centroids, next);
        ++model.iterations_run;
        const bool changed = next != model.assignment;
        model.assignment = std::move(next);
        if (changed) {
            std::vector<std::vector<std::size_t>> m2(k);
            for (std::size_t i = 0; i < vectors.size(); ++i) m2[model.assignment[i]].push_back(i);
            for (std::size_t c = 0; c < k; ++c) model.centroids[c] = mean_vector(vectors, m2[c]);
        }
        model.distortion_trace.push_back(distortion(vectors, model.centroids, model.assignment));
        if (!changed) break;
    }
    return model;
}

double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.size() != b.size()) throw DomainError("labelings differ in length");
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    auto c2 = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sa = 0, sb = 0;
    for (auto& [_, v] : joint) index += c2(v);
    for (auto& [_, v] : ra) sa += c2(v);
    for (auto& [_, v] : rb) sb += c2(v);
    const double total = c2(static_cast<double>(a.size()));
    const double expected = total > 0 ? sa * sb / total : 0;
    const double max_index = (sa + sb) / 2;
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace sysfb
