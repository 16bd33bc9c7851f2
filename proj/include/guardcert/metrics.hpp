#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "guardcert/core.hpp"
#include "guardcert/gmm.hpp"

namespace guardcert {

struct RocPoint {
    double fpr;
    double tpr;
    double threshold;
};

struct RocAnalysis {
    std::vector<RocPoint> points;  ///< threshold descending
    double auc;
    double tau_star;
    double youden_j;
};

/// ROC under the strict rule score > tau. Candidate thresholds are the
/// midpoints between consecutive distinct scores plus one sentinel just below
/// the minimum and one just above the maximum. Youden ties go to the largest
/// threshold.
RocAnalysis roc(std::span<const double> scores, std::span<const int> labels);

/// Largest double strictly below the minimum harmful score, so every harmful
/// score is flagged.
double pessimistic_threshold(std::span<const double> harmful_scores);

struct FidelityReport {
    long true_pos = 0;
    long false_pos = 0;
    long true_neg = 0;
    long false_neg = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;  ///< nothing inside the spec
    bool recall_undefined = false;     ///< no harmful points evaluated
};

FidelityReport fidelity_from_counts(long tp, long fp, long tn, long fn);

using Membership = std::function<bool(const Eigen::Ref<const Vector>&)>;

FidelityReport fidelity(const Membership& inside, const ActivationSet& harmful_holdout,
                        const ActivationSet& benign_holdout);

enum class SweepMethod { multi_rect, gmm };

struct SweepConfig {
    SweepMethod method = SweepMethod::multi_rect;
    std::vector<int> grid;  ///< min cluster sizes or component counts
    CovarianceKind covariance = CovarianceKind::full;
    std::uint64_t seed = 0;
};

struct SweepRow {
    int param;
    FidelityReport report;
    int clusters = 0;   ///< rectangles or components in the rebuilt spec
    bool flagged = false;
    std::string note;
};

/// Rebuilds the spec from `construction` for every grid value and scores it
/// on the holdouts. Rows follow grid order.
std::vector<SweepRow> sweep(const ActivationSet& construction, const ActivationSet& harmful_holdout,
                            const ActivationSet& benign_holdout, const SweepConfig& config);

}  // namespace guardcert
