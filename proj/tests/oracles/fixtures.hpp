#pragma once

#include <cstdint>
#include <random>

#include "guardcert/core.hpp"

namespace fixtures {

using guardcert::Matrix;
using guardcert::Vector;

inline Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                              double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = g(rng);
        }
    }
    return m;
}

inline Vector gaussian_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    return gaussian_matrix(rng, n, 1, scale).col(0);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Random box with lower <= upper.
inline void random_box(std::mt19937_64& rng, Eigen::Index d, Vector& lower, Vector& upper) {
    lower.resize(d);
    upper.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double a = uniform(rng, -2.0, 2.0);
        const double b = uniform(rng, -2.0, 2.0);
        lower[i] = std::min(a, b);
        upper[i] = std::max(a, b);
    }
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
inline Matrix random_orthogonal(std::mt19937_64& rng, Eigen::Index d) {
    const Matrix g = gaussian_matrix(rng, d, d);
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(d, d);
}

/// Points drawn around `centre` directions with small angular noise.
inline Matrix direction_bundle(std::mt19937_64& rng, const Vector& centre, Eigen::Index count,
                               double noise) {
    Matrix m(count, centre.size());
    for (Eigen::Index r = 0; r < count; ++r) {
        m.row(r) = (centre + gaussian_vector(rng, centre.size(), noise)).transpose();
    }
    return m;
}

}  // namespace fixtures
