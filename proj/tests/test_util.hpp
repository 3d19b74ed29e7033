#ifndef CTDS_TEST_UTIL_HPP
#define CTDS_TEST_UTIL_HPP

#include <cmath>
#include <functional>

#include "ctds/common.hpp"

namespace ctds::test {

// |a-b| scaled by magnitude, with a floor so near-zero pairs compare absolutely
inline double rel_err(double a, double b, double floor = 1e-3) {
    return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

// central finite difference of a scalar function
inline double central_diff(const std::function<double(double)>& f, double x0, double h = 1e-4) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

// chi-square critical value at significance 0.01, Wilson-Hilferty approximation
inline double chi2_crit_1pct(int df) {
    const double z = 2.3263478740408408;  // Phi^{-1}(0.99)
    const double d = static_cast<double>(df);
    const double t = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
    return d * t * t * t;
}

}  // namespace ctds::test

#endif  // CTDS_TEST_UTIL_HPP
