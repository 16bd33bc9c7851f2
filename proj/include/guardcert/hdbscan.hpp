#pragma once

#include <vector>

#include "guardcert/core.hpp"

namespace guardcert {

struct ClusterResult {
    std::vector<int> labels;  ///< -1 = noise, 0..C-1 = cluster
    int num_clusters = 0;
    int min_cluster_size = 0;
    std::vector<double> core_distances;
};

struct MstEdge {
    Eigen::Index a;  ///< smaller endpoint
    Eigen::Index b;
    double weight;
};

/// Distances below this are treated as equal when converting to density
/// levels (lambda = 1 / distance).
inline constexpr double kMinLinkDistance = 1e-12;

/// 1 - cos(a, b), clamped to [0, 2]. Throws on zero-norm input.
double cosine_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Distance from each row to its k-th nearest other row, k = min(m, N - 1).
std::vector<double> core_distances(const Eigen::Ref<const Matrix>& points, int min_samples);

/// Prim's MST over mutual-reachability distances
/// max(core(a), core(b), cosine(a, b)). Edges are totally ordered by
/// (weight, min index, max index), so the tree is unique; returned sorted in
/// that order.
std::vector<MstEdge> mutual_reachability_mst(const Eigen::Ref<const Matrix>& points,
                                             const std::vector<double>& core);

/// HDBSCAN with cosine distance, min_samples = min_cluster_size = m, and
/// excess-of-mass cluster selection. Clusters are numbered by their smallest
/// member index.
ClusterResult hdbscan(const Eigen::Ref<const Matrix>& points, int min_cluster_size);

}  // namespace guardcert
