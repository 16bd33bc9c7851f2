#pragma once

#include <string_view>
#include <vector>

#include "guardcert/core.hpp"
#include "guardcert/regions_rect.hpp"

namespace guardcert {

/// SAT: some point of the region scores <= tau (a counterexample exists).
/// UNSAT: every point of the region scores > tau.
enum class Verdict { sat, unsat };

std::string_view to_string(Verdict v);

struct ExactCertificate {
    Verdict verdict;
    double z_min;
    double score_min;
    Vector witness_rotated;
    Vector witness_original;
    double tau;
    double margin;
    int rect_index = 0;
};

struct MultiCertificate {
    std::vector<ExactCertificate> rects;
    Verdict aggregate;
    double min_margin;
};

/// Corner of [lower, upper] minimising weights . x. Zero weights take the
/// lower bound.
Vector worst_case_point(const Eigen::Ref<const Vector>& weights,
                        const Eigen::Ref<const Vector>& lower,
                        const Eigen::Ref<const Vector>& upper);

/// Minimum pre-activation over the box: sum_i min(w_i l_i, w_i u_i) + b.
double min_logit(const ClassifierHead& head, const Eigen::Ref<const Vector>& lower,
                 const Eigen::Ref<const Vector>& upper);

/// `head_rotated` must already be expressed in the rectangle's rotated frame
/// (see rotate_head).
ExactCertificate verify_rect(const ClassifierHead& head_rotated, const RectSpec& rect, double tau,
                             int rect_index = 0);

/// Rotates `head` into each rectangle's frame and verifies it. Aggregate is
/// SAT when any rectangle is SAT.
MultiCertificate verify_multi(const ClassifierHead& head, const MultiRectSpec& spec, double tau);

}  // namespace guardcert
