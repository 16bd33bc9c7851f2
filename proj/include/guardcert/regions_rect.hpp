#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guardcert/core.hpp"

namespace guardcert {

/// Bounding box in principal-axis coordinates. `rotation` holds the
/// right-singular vectors as rows, so a point x maps to rotation * x.
struct RectSpec {
    Matrix rotation;
    Vector lower;
    Vector upper;
    long member_count = 0;
    std::optional<int> cluster_id;

    Eigen::Index dim() const { return lower.size(); }
};

struct ClusteringParams {
    int min_cluster_size = 0;
    std::string metric = "cosine";
};

struct MultiRectSpec {
    std::vector<RectSpec> rects;
    ClusteringParams clustering;
    long noise_count = 0;
    /// Per-point cluster labels used to build the spec (-1 = noise).
    std::vector<int> labels;

    Eigen::Index dim() const { return rects.empty() ? 0 : rects.front().dim(); }
};

/// Principal axes of the mean-centred points, completed to a full
/// orthonormal basis. Rows are ordered by descending singular value and the
/// first nonzero entry of each row is positive.
Matrix fit_rotation(const Eigen::Ref<const Matrix>& points);

/// W~ = V^T W; the bias is unchanged.
ClassifierHead rotate_head(const ClassifierHead& head, const Eigen::Ref<const Matrix>& rotation);

RectSpec build_single_rect(const Eigen::Ref<const Matrix>& points,
                           const Eigen::Ref<const Matrix>& rotation);

/// Convenience overload: fits the rotation on `points` first.
RectSpec build_single_rect(const Eigen::Ref<const Matrix>& points);

/// One rectangle per non-noise label, each with its own rotation. Labels
/// must come from clustering with `params`; -1 marks noise.
MultiRectSpec build_multi_rect(const Eigen::Ref<const Matrix>& points,
                               const std::vector<int>& cluster_labels,
                               ClusteringParams params = {});

bool rect_contains(const RectSpec& spec, const Eigen::Ref<const Vector>& x);

bool multi_rect_contains(const MultiRectSpec& spec, const Eigen::Ref<const Vector>& x);

/// Checks the RectSpec invariants (orthogonality, ordered bounds).
void validate_rect(const RectSpec& spec);

}  // namespace guardcert
