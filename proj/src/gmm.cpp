#include "guardcert/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "guardcert/normal.hpp"

namespace guardcert {

namespace {

constexpr double kWeightSumTol = 1e-10;
constexpr double kSymmetryTol = 1e-10;
constexpr double kEmptyComponentMass = 1e-8;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) {
        return m;
    }
    return m + std::log((v.array() - m).exp().sum());
}

std::vector<Eigen::Index> kmeanspp_seeds(const Eigen::Ref<const Matrix>& x, int k,
                                         std::mt19937_64& rng) {
    const Eigen::Index n = x.rows();
    std::vector<Eigen::Index> seeds;
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    seeds.push_back(pick(rng));
    Vector d2 = (x.rowwise() - x.row(seeds[0])).rowwise().squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(seeds.size()) < k) {
        const double total = d2.sum();
        Eigen::Index chosen = -1;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
            if (chosen < 0) {
                // Rounding left target at the very end of the range.
                for (Eigen::Index i = n - 1; i >= 0; --i) {
                    if (d2[i] > 0.0) {
                        chosen = i;
                        break;
                    }
                }
            }
        } else {
            chosen = pick(rng);
        }
        seeds.push_back(chosen);
        d2 = d2.cwiseMin((x.rowwise() - x.row(chosen)).rowwise().squaredNorm());
    }
    return seeds;
}

struct EStep {
    Matrix resp;     // N x K
    Vector row_ll;   // N
    double total_ll; // sum of row_ll
};

EStep expectation(const GmmSpec& spec, const Eigen::Ref<const Matrix>& x) {
    const GmmDensity density(spec);
    const Matrix logp = density.weighted_component_log_densities(x);
    EStep e;
    e.row_ll.resize(x.rows());
    e.resp.resize(x.rows(), spec.components());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double lse = log_sum_exp(logp.row(i));
        e.row_ll[i] = lse;
        e.resp.row(i) = (logp.row(i).array() - lse).exp().matrix();
    }
    e.total_ll = e.row_ll.sum();
    return e;
}

}  // namespace

std::string_view to_string(CovarianceKind kind) {
    return kind == CovarianceKind::full ? "full" : "diag";
}

CovarianceKind parse_covariance_kind(std::string_view text) {
    if (text == "full" || text == "FULL") {
        return CovarianceKind::full;
    }
    if (text == "diag" || text == "DIAG") {
        return CovarianceKind::diag;
    }
    throw DomainError("unknown covariance kind '" + std::string(text) + "'");
}

double GmmSpec::projected_variance(Eigen::Index c, const Eigen::Ref<const Vector>& w) const {
    if (kind == CovarianceKind::full) {
        return w.dot(covariances[static_cast<std::size_t>(c)] * w);
    }
    return (w.array().square() * variances.row(c).transpose().array()).sum();
}

void validate_gmm(const GmmSpec& spec) {
    const Eigen::Index k = spec.components();
    const Eigen::Index d = spec.dim();
    if (k < 1 || d < 1) {
        throw DimensionError("mixture needs at least one component and one dimension");
    }
    if (spec.means.rows() != k) {
        throw DimensionError("means must have one row per component");
    }
    require_finite(spec.weights, "mixture weights");
    require_finite(spec.means, "mixture means");
    if ((spec.weights.array() < 0.0).any()) {
        throw DomainError("mixture weights must be non-negative");
    }
    if (std::abs(spec.weights.sum() - 1.0) > kWeightSumTol) {
        throw DomainError("mixture weights must sum to one");
    }
    if (spec.kind == CovarianceKind::full) {
        if (static_cast<Eigen::Index>(spec.covariances.size()) != k) {
            throw DimensionError("full mixture needs one covariance per component");
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            const Matrix& cov = spec.covariances[static_cast<std::size_t>(c)];
            const std::string name = "covariance " + std::to_string(c);
            if (cov.rows() != d || cov.cols() != d) {
                throw DimensionError(name + " has the wrong shape");
            }
            require_finite(cov, name);
            if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
                throw DomainError(name + " is not symmetric");
            }
            if (Eigen::LLT<Matrix>(cov).info() != Eigen::Success) {
                throw DomainError(name + " is not positive definite");
            }
        }
    } else {
        if (spec.variances.rows() != k || spec.variances.cols() != d) {
            throw DimensionError("diagonal mixture variances must be K x d");
        }
        require_finite(spec.variances, "variances");
        if ((spec.variances.array() <= 0.0).any()) {
            throw DomainError("diagonal variances must be positive");
        }
    }
}

GmmDensity::GmmDensity(const GmmSpec& spec) : spec_(spec), log_norm_(spec.components()) {
    validate_gmm(spec_);
    const auto d = static_cast<double>(spec_.dim());
    for (Eigen::Index c = 0; c < spec_.components(); ++c) {
        double log_det = 0.0;
        if (spec_.kind == CovarianceKind::full) {
            chol_.emplace_back(spec_.covariances[static_cast<std::size_t>(c)]);
            log_det = 2.0 * chol_.back().matrixLLT().diagonal().array().log().sum();
        } else {
            log_det = spec_.variances.row(c).array().log().sum();
        }
        log_norm_[c] = -0.5 * (d * kLog2Pi + log_det);
    }
}

Matrix GmmDensity::weighted_component_log_densities(const Eigen::Ref<const Matrix>& points) const {
    if (points.cols() != spec_.dim()) {
        throw DimensionError("points have dimension " + std::to_string(points.cols()) +
                             ", mixture has " + std::to_string(spec_.dim()));
    }
    Matrix out(points.rows(), spec_.components());
    for (Eigen::Index c = 0; c < spec_.components(); ++c) {
        const Matrix diff = points.rowwise() - spec_.means.row(c);
        Vector quad;
        if (spec_.kind == CovarianceKind::full) {
            const Matrix y = chol_[static_cast<std::size_t>(c)].matrixL().solve(diff.transpose());
            quad = y.colwise().squaredNorm().transpose();
        } else {
            quad = (diff.array().square().rowwise() / spec_.variances.row(c).array())
                       .rowwise()
                       .sum()
                       .matrix();
        }
        out.col(c) = (std::log(spec_.weights[c]) + log_norm_[c] - 0.5 * quad.array()).matrix();
    }
    return out;
}

Vector GmmDensity::log_density_rows(const Eigen::Ref<const Matrix>& points) const {
    const Matrix logp = weighted_component_log_densities(points);
    Vector out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        out[i] = log_sum_exp(logp.row(i));
    }
    return out;
}

double GmmDensity::log_density(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != spec_.dim()) {
        throw DimensionError("point has dimension " + std::to_string(x.size()) +
                             ", mixture has " + std::to_string(spec_.dim()));
    }
    return log_density_rows(x.transpose())[0];
}

double log_density(const GmmSpec& spec, const Eigen::Ref<const Vector>& x) {
    return GmmDensity(spec).log_density(x);
}

GmmFit fit_gmm(const Eigen::Ref<const Matrix>& points, int components, CovarianceKind kind,
               std::uint64_t seed, const GmmOptions& options) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    if (components < 1) {
        throw DomainError("number of components must be positive");
    }
    if (n < 1 || d < 1) {
        throw DimensionError("cannot fit a mixture to an empty point set");
    }
    if (components > n) {
        throw DomainError("more components (" + std::to_string(components) + ") than points (" +
                          std::to_string(n) + ")");
    }
    if (kind == CovarianceKind::full && n < d + 2) {
        throw DomainError("insufficient samples for full covariance: need at least d + 2 = " +
                          std::to_string(d + 2) + " points, got " + std::to_string(n));
    }
    require_finite(points, "points");

    const Eigen::RowVectorXd mean = points.colwise().mean();
    const Matrix centered = points.rowwise() - mean;
    const Eigen::RowVectorXd coord_var = centered.array().square().colwise().mean();
    const double mean_var = coord_var.mean();
    const double eps = mean_var > 0.0 ? 1e-6 * mean_var : 1e-6;
    const auto nd = static_cast<double>(n);

    Matrix data_cov;
    if (kind == CovarianceKind::full) {
        data_cov = centered.transpose() * centered / nd;
        data_cov.diagonal().array() += eps;
    }
    const Eigen::RowVectorXd data_var = coord_var.array() + eps;

    std::mt19937_64 rng(seed);
    GmmFit fit;
    fit.regularization = eps;
    GmmSpec& spec = fit.spec;
    spec.kind = kind;
    spec.weights = Vector::Constant(components, 1.0 / components);
    spec.means.resize(components, d);
    const auto seeds = kmeanspp_seeds(points, components, rng);
    for (int c = 0; c < components; ++c) {
        spec.means.row(c) = points.row(seeds[static_cast<std::size_t>(c)]);
    }
    if (kind == CovarianceKind::full) {
        spec.covariances.assign(static_cast<std::size_t>(components), data_cov);
    } else {
        spec.variances = data_var.replicate(components, 1);
    }

    bool reseeded = false;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const EStep e = expectation(spec, points);
        fit.log_likelihood.push_back(e.total_ll);
        if (reseeded) {
            fit.reseeded_at.push_back(iter);
            reseeded = false;
        }
        fit.iterations = iter + 1;
        if (iter > 0) {
            const double prev = fit.log_likelihood[fit.log_likelihood.size() - 2];
            if (e.total_ll - prev < options.tolerance * nd) {
                fit.converged = true;
                break;
            }
        }

        Vector mass = e.resp.colwise().sum().transpose();
        std::vector<char> taken(static_cast<std::size_t>(n), 0);
        std::vector<char> restarted(static_cast<std::size_t>(components), 0);
        for (int c = 0; c < components; ++c) {
            if (mass[c] >= kEmptyComponentMass) {
                continue;
            }
            // Empty component: restart it on the worst-explained point.
            Eigen::Index worst = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!taken[static_cast<std::size_t>(i)] &&
                    (worst < 0 || e.row_ll[i] < e.row_ll[worst])) {
                    worst = i;
                }
            }
            taken[static_cast<std::size_t>(worst)] = 1;
            restarted[static_cast<std::size_t>(c)] = 1;
            spec.means.row(c) = points.row(worst);
            if (kind == CovarianceKind::full) {
                spec.covariances[static_cast<std::size_t>(c)] = data_cov;
            } else {
                spec.variances.row(c) = data_var;
            }
            mass[c] = 1.0;
            reseeded = true;
        }

        for (int c = 0; c < components; ++c) {
            const auto uc = static_cast<std::size_t>(c);
            if (restarted[uc]) {
                continue;
            }
            const auto r = e.resp.col(c).array();
            spec.means.row(c) = (e.resp.col(c).transpose() * points) / mass[c];
            const Matrix diff = points.rowwise() - spec.means.row(c);
            if (kind == CovarianceKind::full) {
                Matrix cov = (diff.array().colwise() * r).matrix().transpose() * diff / mass[c];
                cov = 0.5 * (cov + cov.transpose());
                cov.diagonal().array() += eps;
                spec.covariances[uc] = std::move(cov);
            } else {
                spec.variances.row(c) =
                    (diff.array().square().colwise() * r).colwise().sum() / mass[c] + eps;
            }
        }
        spec.weights = mass / mass.sum();
    }
    if (!fit.converged) {
        fit.log_likelihood.push_back(expectation(spec, points).total_ll);
    }
    return fit;
}

double percentile_linear(std::vector<double> values, double p) {
    if (values.empty()) {
        throw DomainError("percentile of an empty set");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError("percentile must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

DensityBoundary density_boundary(const GmmSpec& spec,
                                 const Eigen::Ref<const Matrix>& construction_points) {
    if (construction_points.rows() < 1) {
        throw DimensionError("density boundary needs at least one construction point");
    }
    const Vector logp = GmmDensity(spec).log_density_rows(construction_points);
    std::vector<double> values(logp.data(), logp.data() + logp.size());
    return {percentile_linear(std::move(values), kBoundaryPercentile),
            construction_points.rows() < 20};
}

GmmSpec with_density_boundary(GmmSpec spec, const Eigen::Ref<const Matrix>& construction_points) {
    const DensityBoundary b = density_boundary(spec, construction_points);
    spec.density_boundary = b.value;
    spec.boundary_low_confidence = b.low_confidence;
    return spec;
}

bool gmm_contains(const GmmSpec& spec, const GmmDensity& density,
                  const Eigen::Ref<const Vector>& x) {
    if (!spec.density_boundary) {
        throw DomainError("mixture has no density boundary");
    }
    return density.log_density(x) >= *spec.density_boundary;
}

ProbCertificate certify_gmm(const GmmSpec& spec, const ClassifierHead& head, double tau) {
    validate_gmm(spec);
    if (head.dim() != spec.dim()) {
        throw DimensionError("head has dimension " + std::to_string(head.dim()) +
                             ", mixture has " + std::to_string(spec.dim()));
    }
    ProbCertificate cert;
    cert.tau = tau;
    cert.logit_threshold = inverse_sigmoid(tau);
    cert.total = 0.0;
    const Vector& w = head.weights();
    for (Eigen::Index c = 0; c < spec.components(); ++c) {
        ComponentCoverage cc;
        cc.weight = spec.weights[c];
        cc.mu_z = w.dot(spec.means.row(c).transpose()) + head.bias();
        const double var = spec.projected_variance(c, w);
        if (var < 0.0 || !std::isfinite(var)) {
            throw DomainError("projected variance of component " + std::to_string(c) +
                              " is negative");
        }
        cc.sigma_z = std::sqrt(var);
        if (cc.sigma_z == 0.0) {
            cc.p = cc.mu_z > cert.logit_threshold ? 1.0 : 0.0;
        } else {
            cc.p = normal_sf((cert.logit_threshold - cc.mu_z) / cc.sigma_z);
        }
        cert.total += cc.weight * cc.p;
        cert.per_component.push_back(cc);
    }
    return cert;
}

}  // namespace guardcert
