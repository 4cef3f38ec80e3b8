#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sysfb/embedding.hpp"

namespace sysfb {

struct ClusterModel {
    std::size_t k = 0;
    std::vector<EmbeddingVector> centroids;
    /// assignment[i] is the cluster of point i.
    std::vector<std::size_t> assignment;
    std::uint64_t seed = 0;
    std::size_t iterations_run = 0;
    /// Total squared distance after seeding and after each Lloyd step.
    std::vector<double> distortion_trace;

    std::vector<std::size_t> cluster_sizes() const;
};

double squared_distance(const EmbeddingVector& a, const EmbeddingVector& b);

/// Seeded k-means++ initialization followed by Lloyd iterations until the
/// assignment stops changing or `max_iterations` is reached. Empty clusters
/// take the point farthest from its current centroid. Throws DomainError
/// unless 1 <= k <= vectors.size().
ClusterModel kmeans(const std::vector<EmbeddingVector>& vectors, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 100);

/// Centroid (mean) of the given rows.
EmbeddingVector mean_vector(const std::vector<EmbeddingVector>& vectors, const std::vector<std::size_t>& rows);

/// Adjusted Rand index between two labelings of the same points.
double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

}  // namespace sysfb
