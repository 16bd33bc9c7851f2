#pragma once

#include <cmath>
#include <numbers>

namespace guardcert {

/// Standard normal CDF via erfc, accurate in both tails.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Upper tail 1 - Phi(x), computed without cancellation.
inline double normal_sf(double x) {
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

}  // namespace guardcert
