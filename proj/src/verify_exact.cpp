#include "guardcert/verify_exact.hpp"

#include <algorithm>
#include <limits>

namespace guardcert {

std::string_view to_string(Verdict v) {
    return v == Verdict::sat ? "SAT" : "UNSAT";
}

namespace {

void check_box(const Eigen::Ref<const Vector>& lower, const Eigen::Ref<const Vector>& upper,
               Eigen::Index dim) {
    if (lower.size() != dim || upper.size() != dim) {
        throw DimensionError("box bounds have dimension " + std::to_string(lower.size()) + "/" +
                             std::to_string(upper.size()) + ", expected " + std::to_string(dim));
    }
    require_finite(lower, "lower bound");
    require_finite(upper, "upper bound");
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (lower[i] > upper[i]) {
            throw DomainError("lower bound exceeds upper bound in dimension " + std::to_string(i));
        }
    }
}

void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw DomainError("threshold must lie in (0, 1)");
    }
}

}  // namespace

Vector worst_case_point(const Eigen::Ref<const Vector>& weights,
                        const Eigen::Ref<const Vector>& lower,
                        const Eigen::Ref<const Vector>& upper) {
    check_box(lower, upper, weights.size());
    Vector x(weights.size());
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        x[i] = weights[i] >= 0.0 ? lower[i] : upper[i];
    }
    return x;
}

double min_logit(const ClassifierHead& head, const Eigen::Ref<const Vector>& lower,
                 const Eigen::Ref<const Vector>& upper) {
    check_box(lower, upper, head.dim());
    const Vector& w = head.weights();
    double z = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        z += std::min(w[i] * lower[i], w[i] * upper[i]);
    }
    return z + head.bias();
}

ExactCertificate verify_rect(const ClassifierHead& head_rotated, const RectSpec& rect, double tau,
                             int rect_index) {
    check_tau(tau);
    if (rect.rotation.rows() != head_rotated.dim() || rect.rotation.cols() != head_rotated.dim()) {
        throw DimensionError("rectangle rotation does not match head dimension");
    }
    ExactCertificate cert;
    cert.z_min = min_logit(head_rotated, rect.lower, rect.upper);
    cert.score_min = sigmoid(cert.z_min);
    cert.witness_rotated = worst_case_point(head_rotated.weights(), rect.lower, rect.upper);
    cert.witness_original = rect.rotation.transpose() * cert.witness_rotated;
    cert.tau = tau;
    cert.margin = cert.score_min - tau;
    // A tie is a counterexample: the safety property is strict.
    cert.verdict = flagged(cert.score_min, tau) ? Verdict::unsat : Verdict::sat;
    cert.rect_index = rect_index;
    return cert;
}

MultiCertificate verify_multi(const ClassifierHead& head, const MultiRectSpec& spec, double tau) {
    if (spec.rects.empty()) {
        throw DomainError("multi-rectangle spec has no rectangles");
    }
    MultiCertificate out;
    out.aggregate = Verdict::unsat;
    out.min_margin = std::numeric_limits<double>::infinity();
    out.rects.reserve(spec.rects.size());
    for (std::size_t i = 0; i < spec.rects.size(); ++i) {
        const RectSpec& rect = spec.rects[i];
        if (rect.dim() != head.dim()) {
            throw DimensionError("rectangle " + std::to_string(i) + " has dimension " +
                                 std::to_string(rect.dim()) + ", head expects " +
                                 std::to_string(head.dim()));
        }
        ExactCertificate cert =
            verify_rect(rotate_head(head, rect.rotation), rect, tau, static_cast<int>(i));
        if (cert.verdict == Verdict::sat) {
            out.aggregate = Verdict::sat;
        }
        out.min_margin = std::min(out.min_margin, cert.margin);
        out.rects.push_back(std::move(cert));
    }
    return out;
}

}  // namespace guardcert
