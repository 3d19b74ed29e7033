#ifndef CTDS_COMMON_HPP
#define CTDS_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctds {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Thrown on bad user input (configs, dimension mismatches). Maps to exit code 1.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a computation goes numerically bad. Maps to exit code 2.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw validation_error(msg);
}

inline void require_numeric(bool cond, const std::string& msg) {
    if (!cond) throw numerical_error(msg);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// log(sum_i exp(a_i)) with max subtraction
inline double log_sum_exp(const Vec& a) {
    const double m = a.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((a.array() - m).exp().sum());
}

}  // namespace ctds

#endif  // CTDS_COMMON_HPP
