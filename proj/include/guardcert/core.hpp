#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace guardcert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

enum class TokenPosition { first, last };

struct ActivationMeta {
    std::string model;
    std::optional<TokenPosition> token_position;
    std::string source;
};

/// N x d matrix of finite pre-classification activations, optionally
/// tagged harmful (1) / benign (0) per row.
class ActivationSet {
public:
    explicit ActivationSet(Matrix data, std::optional<std::vector<int>> labels = std::nullopt,
                           ActivationMeta meta = {});

    const Matrix& data() const { return data_; }
    const std::optional<std::vector<int>>& labels() const { return labels_; }
    const ActivationMeta& meta() const { return meta_; }

    Eigen::Index rows() const { return data_.rows(); }
    Eigen::Index dim() const { return data_.cols(); }

    /// Rows whose label equals `label`. Requires labels.
    ActivationSet select_label(int label) const;

private:
    Matrix data_;
    std::optional<std::vector<int>> labels_;
    ActivationMeta meta_;
};

/// Linear head followed by a sigmoid: f(x) = sigmoid(w . x + b).
class ClassifierHead {
public:
    ClassifierHead(Vector weights, double bias);

    const Vector& weights() const { return weights_; }
    double bias() const { return bias_; }
    Eigen::Index dim() const { return weights_.size(); }

    /// w . x + b, with dimension and finiteness checks.
    double logit(const Eigen::Ref<const Vector>& x) const;

private:
    Vector weights_;
    double bias_;
};

struct Thresholds {
    double tau_star;
    double tau_pess;
};

struct Score {
    double value;
};

/// Overflow-free logistic function.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Score head_score(const ClassifierHead& head, const Eigen::Ref<const Vector>& x);

/// ln(tau / (1 - tau)); throws DomainError outside (0, 1).
double inverse_sigmoid(double tau);

/// An input is flagged harmful when its score strictly exceeds tau.
inline bool flagged(double score, double tau) { return score > tau; }

void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what);

}  // namespace guardcert
