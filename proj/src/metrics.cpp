#include "guardcert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "guardcert/hdbscan.hpp"
#include "guardcert/regions_rect.hpp"

namespace guardcert {

RocAnalysis roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("scores and labels differ in length");
    }
    long positives = 0;
    long negatives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw DomainError("score " + std::to_string(i) + " is not finite");
        }
        if (labels[i] == 1) {
            ++positives;
        } else if (labels[i] == 0) {
            ++negatives;
        } else {
            throw DomainError("labels must be 0 or 1");
        }
    }
    if (positives == 0 || negatives == 0) {
        throw DomainError("ROC needs at least one positive and one negative label");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<double> distinct;
    for (std::size_t idx : order) {
        if (distinct.empty() || scores[idx] != distinct.back()) {
            distinct.push_back(scores[idx]);
        }
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> thresholds;
    thresholds.push_back(std::nextafter(distinct.front(), inf));
    for (std::size_t i = 1; i < distinct.size(); ++i) {
        thresholds.push_back(std::midpoint(distinct[i], distinct[i - 1]));
    }
    thresholds.push_back(std::nextafter(distinct.back(), -inf));

    RocAnalysis out;
    out.points.reserve(thresholds.size());
    long tp = 0;
    long fp = 0;
    std::size_t next = 0;
    long best_num = std::numeric_limits<long>::min();
    for (double t : thresholds) {
        while (next < order.size() && flagged(scores[order[next]], t)) {
            if (labels[order[next]] == 1) {
                ++tp;
            } else {
                ++fp;
            }
            ++next;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        out.points.push_back({fpr, tpr, t});
        // J scaled by P * N, compared exactly in integers.
        const long j_num = tp * negatives - fp * positives;
        if (j_num > best_num) {
            best_num = j_num;
            out.tau_star = t;
            out.youden_j = tpr - fpr;
        }
    }

    out.auc = 0.0;
    for (std::size_t i = 1; i < out.points.size(); ++i) {
        const RocPoint& a = out.points[i - 1];
        const RocPoint& b = out.points[i];
        out.auc += (b.fpr - a.fpr) * (b.tpr + a.tpr) / 2.0;
    }
    return out;
}

double pessimistic_threshold(std::span<const double> harmful_scores) {
    if (harmful_scores.empty()) {
        throw DomainError("pessimistic threshold needs at least one harmful score");
    }
    const double lowest = *std::min_element(harmful_scores.begin(), harmful_scores.end());
    if (!std::isfinite(lowest)) {
        throw DomainError("harmful scores must be finite");
    }
    return std::nextafter(lowest, -std::numeric_limits<double>::infinity());
}

FidelityReport fidelity_from_counts(long tp, long fp, long tn, long fn) {
    FidelityReport r;
    r.true_pos = tp;
    r.false_pos = fp;
    r.true_neg = tn;
    r.false_neg = fn;
    if (tp + fp > 0) {
        r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    } else {
        r.precision_undefined = true;
    }
    if (tp + fn > 0) {
        r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    } else {
        r.recall_undefined = true;
    }
    if (r.precision + r.recall > 0.0) {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    }
    return r;
}

FidelityReport fidelity(const Membership& inside, const ActivationSet& harmful_holdout,
                        const ActivationSet& benign_holdout) {
    if (harmful_holdout.dim() != benign_holdout.dim()) {
        throw DimensionError("harmful and benign holdouts differ in dimension");
    }
    long tp = 0;
    long fn = 0;
    long fp = 0;
    long tn = 0;
    const Matrix& h = harmful_holdout.data();
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        if (inside(h.row(i).transpose())) {
            ++tp;
        } else {
            ++fn;
        }
    }
    const Matrix& b = benign_holdout.data();
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        if (inside(b.row(i).transpose())) {
            ++fp;
        } else {
            ++tn;
        }
    }
    return fidelity_from_counts(tp, fp, tn, fn);
}

std::vector<SweepRow> sweep(const ActivationSet& construction, const ActivationSet& harmful_holdout,
                            const ActivationSet& benign_holdout, const SweepConfig& config) {
    if (config.grid.empty()) {
        throw DomainError("sweep grid is empty");
    }
    if (construction.dim() != harmful_holdout.dim()) {
        throw DimensionError("construction set and holdouts differ in dimension");
    }
    const Eigen::Index n = construction.rows();
    for (int v : config.grid) {
        if (config.method == SweepMethod::multi_rect && (v < 2 || v > n)) {
            throw DomainError("min cluster size " + std::to_string(v) + " outside [2, " +
                              std::to_string(n) + "]");
        }
        if (config.method == SweepMethod::gmm && (v < 1 || v > n)) {
            throw DomainError("component count " + std::to_string(v) + " outside [1, " +
                              std::to_string(n) + "]");
        }
    }

    std::vector<SweepRow> rows;
    for (int v : config.grid) {
        SweepRow row;
        row.param = v;
        if (config.method == SweepMethod::multi_rect) {
            const ClusterResult clusters = hdbscan(construction.data(), v);
            row.clusters = clusters.num_clusters;
            if (clusters.num_clusters == 0) {
                row.flagged = true;
                row.note = "all points noise";
                row.report = fidelity([](const auto&) { return false; }, harmful_holdout,
                                      benign_holdout);
                rows.push_back(std::move(row));
                continue;
            }
            if (clusters.num_clusters < 2) {
                row.flagged = true;
                row.note = "fewer than two clusters";
            }
            const MultiRectSpec spec =
                build_multi_rect(construction.data(), clusters.labels, {v, "cosine"});
            row.report = fidelity([&](const auto& x) { return multi_rect_contains(spec, x); },
                                  harmful_holdout, benign_holdout);
        } else {
            const GmmFit fit = fit_gmm(construction.data(), v, config.covariance, config.seed);
            const GmmSpec spec = with_density_boundary(fit.spec, construction.data());
            const GmmDensity density(spec);
            row.clusters = v;
            if (!fit.converged) {
                row.flagged = true;
                row.note = "EM did not converge";
            }
            row.report = fidelity([&](const auto& x) { return gmm_contains(spec, density, x); },
                                  harmful_holdout, benign_holdout);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace guardcert
