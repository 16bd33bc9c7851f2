#include "guardcert/regions_rect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/SVD>

namespace guardcert {

namespace {

constexpr double kContainSlack = 1e-9;
constexpr double kOrthoTol = 1e-6;
constexpr double kSignTol = 1e-10;

void flip_to_positive_lead(Eigen::Ref<Vector> v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > kSignTol) {
            if (v[i] < 0.0) {
                v = -v;
            }
            return;
        }
    }
}

void check_square(const Eigen::Ref<const Matrix>& rotation, Eigen::Index dim) {
    if (rotation.rows() != dim || rotation.cols() != dim) {
        throw DimensionError("rotation is " + std::to_string(rotation.rows()) + "x" +
                             std::to_string(rotation.cols()) + ", expected " +
                             std::to_string(dim) + "x" + std::to_string(dim));
    }
}

}  // namespace

Matrix fit_rotation(const Eigen::Ref<const Matrix>& points) {
    if (points.rows() < 1 || points.cols() < 1) {
        throw DimensionError("fit_rotation needs at least one point");
    }
    require_finite(points, "points");
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();

    const Eigen::RowVectorXd mean = points.colwise().mean();
    const Matrix centered = points.rowwise() - mean;
    if (centered.cwiseAbs().maxCoeff() == 0.0) {
        return Matrix::Identity(d, d);
    }

    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double tol =
        static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon() * sv[0];
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > tol) {
        ++rank;
    }

    Matrix basis(d, d);
    basis.leftCols(rank) = svd.matrixV().leftCols(rank);
    if (rank < d) {
        // Orthonormal complement of the principal subspace.
        Eigen::HouseholderQR<Matrix> qr(basis.leftCols(rank));
        const Matrix q = qr.householderQ();
        basis.rightCols(d - rank) = q.rightCols(d - rank);
    }
    for (Eigen::Index c = 0; c < d; ++c) {
        flip_to_positive_lead(basis.col(c));
    }
    return basis.transpose();
}

ClassifierHead rotate_head(const ClassifierHead& head, const Eigen::Ref<const Matrix>& rotation) {
    check_square(rotation, head.dim());
    return ClassifierHead(rotation * head.weights(), head.bias());
}

RectSpec build_single_rect(const Eigen::Ref<const Matrix>& points,
                           const Eigen::Ref<const Matrix>& rotation) {
    if (points.rows() < 1) {
        throw DimensionError("cannot build a rectangle from an empty point set");
    }
    require_finite(points, "points");
    check_square(rotation, points.cols());

    const Matrix rotated = points * rotation.transpose();
    RectSpec rect;
    rect.rotation = rotation;
    rect.lower = rotated.colwise().minCoeff().transpose();
    rect.upper = rotated.colwise().maxCoeff().transpose();
    rect.member_count = static_cast<long>(points.rows());
    return rect;
}

RectSpec build_single_rect(const Eigen::Ref<const Matrix>& points) {
    return build_single_rect(points, fit_rotation(points));
}

MultiRectSpec build_multi_rect(const Eigen::Ref<const Matrix>& points,
                               const std::vector<int>& cluster_labels, ClusteringParams params) {
    if (static_cast<Eigen::Index>(cluster_labels.size()) != points.rows()) {
        throw DimensionError("label count does not match point count");
    }
    std::map<int, std::vector<Eigen::Index>> members;
    long noise = 0;
    for (std::size_t i = 0; i < cluster_labels.size(); ++i) {
        const int label = cluster_labels[i];
        if (label < -1) {
            throw DomainError("invalid cluster label " + std::to_string(label));
        }
        if (label == -1) {
            ++noise;
        } else {
            members[label].push_back(static_cast<Eigen::Index>(i));
        }
    }
    if (members.empty()) {
        throw DomainError("every point is labelled noise; no rectangle can be built");
    }

    MultiRectSpec spec;
    spec.clustering = std::move(params);
    spec.noise_count = noise;
    spec.labels = cluster_labels;
    for (const auto& [label, rows] : members) {
        Matrix cluster(static_cast<Eigen::Index>(rows.size()), points.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            cluster.row(static_cast<Eigen::Index>(r)) = points.row(rows[r]);
        }
        RectSpec rect = build_single_rect(cluster);
        rect.cluster_id = label;
        spec.rects.push_back(std::move(rect));
    }
    return spec;
}

bool rect_contains(const RectSpec& spec, const Eigen::Ref<const Vector>& x) {
    if (x.size() != spec.dim()) {
        throw DimensionError("point has dimension " + std::to_string(x.size()) +
                             ", rectangle has " + std::to_string(spec.dim()));
    }
    const Vector y = spec.rotation * x;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double lo = spec.lower[i] - kContainSlack * (1.0 + std::abs(spec.lower[i]));
        const double hi = spec.upper[i] + kContainSlack * (1.0 + std::abs(spec.upper[i]));
        if (!(y[i] >= lo && y[i] <= hi)) {
            return false;
        }
    }
    return true;
}

bool multi_rect_contains(const MultiRectSpec& spec, const Eigen::Ref<const Vector>& x) {
    return std::any_of(spec.rects.begin(), spec.rects.end(),
                       [&](const RectSpec& r) { return rect_contains(r, x); });
}

void validate_rect(const RectSpec& spec) {
    const Eigen::Index d = spec.lower.size();
    if (d < 1 || spec.upper.size() != d) {
        throw DimensionError("rectangle bounds have inconsistent dimensions");
    }
    check_square(spec.rotation, d);
    require_finite(spec.rotation, "rotation");
    require_finite(spec.lower, "lower bound");
    require_finite(spec.upper, "upper bound");
    const double err =
        (spec.rotation.transpose() * spec.rotation - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (err > kOrthoTol) {
        throw DomainError("rotation is not orthogonal (max deviation " + std::to_string(err) + ")");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (spec.lower[i] > spec.upper[i]) {
            throw DomainError("lower bound exceeds upper bound in dimension " + std::to_string(i));
        }
    }
}

}  // namespace guardcert
