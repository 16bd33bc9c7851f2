#include "guardcert/core.hpp"

#include <cmath>

namespace guardcert {

void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what) {
    if (!m.allFinite()) {
        throw DomainError(what + ": non-finite value");
    }
}

ActivationSet::ActivationSet(Matrix data, std::optional<std::vector<int>> labels,
                             ActivationMeta meta)
    : data_(std::move(data)), labels_(std::move(labels)), meta_(std::move(meta)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
        throw DimensionError("activation set must have at least one row and one column");
    }
    require_finite(data_, "activation set");
    if (labels_) {
        if (static_cast<Eigen::Index>(labels_->size()) != data_.rows()) {
            throw DimensionError("label count " + std::to_string(labels_->size()) +
                                 " does not match row count " + std::to_string(data_.rows()));
        }
        for (int l : *labels_) {
            if (l != 0 && l != 1) {
                throw DomainError("labels must be 0 or 1");
            }
        }
    }
}

ActivationSet ActivationSet::select_label(int label) const {
    if (!labels_) {
        throw DomainError("activation set has no labels");
    }
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < data_.rows(); ++i) {
        if ((*labels_)[static_cast<std::size_t>(i)] == label) {
            rows.push_back(i);
        }
    }
    if (rows.empty()) {
        throw DomainError("no rows carry label " + std::to_string(label));
    }
    Matrix out(static_cast<Eigen::Index>(rows.size()), data_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = data_.row(rows[r]);
    }
    return ActivationSet(std::move(out), std::vector<int>(rows.size(), label), meta_);
}

ClassifierHead::ClassifierHead(Vector weights, double bias)
    : weights_(std::move(weights)), bias_(bias) {
    if (weights_.size() < 1) {
        throw DimensionError("classifier head needs at least one weight");
    }
    require_finite(weights_, "head weights");
    if (!std::isfinite(bias_)) {
        throw DomainError("head bias: non-finite value");
    }
}

double ClassifierHead::logit(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != weights_.size()) {
        throw DimensionError("input has dimension " + std::to_string(x.size()) +
                             ", head expects " + std::to_string(weights_.size()));
    }
    require_finite(x, "head input");
    return weights_.dot(x) + bias_;
}

Score head_score(const ClassifierHead& head, const Eigen::Ref<const Vector>& x) {
    return Score{sigmoid(head.logit(x))};
}

double inverse_sigmoid(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw DomainError("threshold must lie in (0, 1), got " + std::to_string(tau));
    }
    return std::log(tau) - std::log1p(-tau);
}

}  // namespace guardcert
