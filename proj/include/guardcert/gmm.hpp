#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>

#include "guardcert/core.hpp"

namespace guardcert {

enum class CovarianceKind { full, diag };

std::string_view to_string(CovarianceKind kind);
CovarianceKind parse_covariance_kind(std::string_view text);

/// K-component Gaussian mixture over activation space.
struct GmmSpec {
    CovarianceKind kind = CovarianceKind::full;
    Vector weights;                   ///< K mixing weights, summing to one
    Matrix means;                     ///< K x d
    std::vector<Matrix> covariances;  ///< K blocks of d x d, FULL only
    Matrix variances;                 ///< K x d, DIAG only
    /// Log-density at the 5th percentile of the construction points.
    std::optional<double> density_boundary;
    bool boundary_low_confidence = false;

    Eigen::Index components() const { return weights.size(); }
    Eigen::Index dim() const { return means.cols(); }

    /// w^T Sigma_c w.
    double projected_variance(Eigen::Index c, const Eigen::Ref<const Vector>& w) const;
};

/// Throws if the spec violates its invariants (weights, symmetry, definiteness).
void validate_gmm(const GmmSpec& spec);

struct GmmOptions {
    double tolerance = 1e-6;  ///< on mean per-sample log-likelihood
    int max_iterations = 500;
};

struct GmmFit {
    GmmSpec spec;
    /// Total log-likelihood recorded after each E-step.
    std::vector<double> log_likelihood;
    /// Iterations (indices into log_likelihood) that followed an empty-component re-seed.
    std::vector<int> reseeded_at;
    int iterations = 0;
    bool converged = false;
    double regularization = 0.0;
};

GmmFit fit_gmm(const Eigen::Ref<const Matrix>& points, int components, CovarianceKind kind,
               std::uint64_t seed, const GmmOptions& options = {});

/// Caches per-component factorisations for repeated density evaluation.
class GmmDensity {
public:
    explicit GmmDensity(const GmmSpec& spec);

    double log_density(const Eigen::Ref<const Vector>& x) const;

    /// log p(x) for every row.
    Vector log_density_rows(const Eigen::Ref<const Matrix>& points) const;

    /// N x K matrix of log(pi_c) + log N(x; mu_c, Sigma_c).
    Matrix weighted_component_log_densities(const Eigen::Ref<const Matrix>& points) const;

private:
    GmmSpec spec_;
    std::vector<Eigen::LLT<Matrix>> chol_;
    Vector log_norm_;
};

double log_density(const GmmSpec& spec, const Eigen::Ref<const Vector>& x);

/// Linear interpolation between closest order statistics (p in [0, 1]).
double percentile_linear(std::vector<double> values, double p);

struct DensityBoundary {
    double value;
    bool low_confidence;
};

inline constexpr double kBoundaryPercentile = 0.05;

DensityBoundary density_boundary(const GmmSpec& spec,
                                 const Eigen::Ref<const Matrix>& construction_points);

/// Returns a copy of `spec` with density_boundary filled from `construction_points`.
GmmSpec with_density_boundary(GmmSpec spec, const Eigen::Ref<const Matrix>& construction_points);

/// log p(x) >= boundary. Requires a boundary.
bool gmm_contains(const GmmSpec& spec, const GmmDensity& density,
                  const Eigen::Ref<const Vector>& x);

struct ComponentCoverage {
    double weight;
    double mu_z;
    double sigma_z;
    double p;
};

struct ProbCertificate {
    double tau;
    double logit_threshold;
    std::vector<ComponentCoverage> per_component;
    double total;
};

/// Closed-form probability mass of the mixture that the head scores above tau.
ProbCertificate certify_gmm(const GmmSpec& spec, const ClassifierHead& head, double tau);

}  // namespace guardcert
