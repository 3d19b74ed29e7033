#ifndef CTDS_TEMPERING_HPP
#define CTDS_TEMPERING_HPP

#include "ctds/common.hpp"

namespace ctds {

// Inverse-temperature reparameterization beta(xi): 1 on the inner plateau
// |xi| < delta, a cubic smoothstep down across [delta, delta_prime], and
// beta_min outside. C^1 everywhere; beta' vanishes on both plateaus.
struct TemperatureSchedule {
    double beta_min = 0.2;
    double delta = 0.25;
    double delta_prime = 1.9;

    void validate() const {
        require(beta_min > 0.0 && beta_min <= 1.0, "TemperatureSchedule: beta_min in (0,1]");
        require(delta > 0.0 && delta < delta_prime,
                "TemperatureSchedule: need 0 < delta < delta_prime");
    }

    void beta(double xi, double& b, double& db_dxi) const {
        const double a = std::abs(xi);
        if (a < delta) {
            b = 1.0;
            db_dxi = 0.0;
        } else if (a > delta_prime) {
            b = beta_min;
            db_dxi = 0.0;
        } else {
            const double w = delta_prime - delta;
            const double s = (a - delta) / w;
            // clamp away the last-ulp rounding so the range is exactly [beta_min, 1]
            b = std::min(1.0, std::max(beta_min, 1.0 - (1.0 - beta_min) * (3.0 * s * s - 2.0 * s * s * s)));
            db_dxi = -(1.0 - beta_min) * 6.0 * (s - s * s) / w * (xi < 0.0 ? -1.0 : 1.0);
        }
    }

    double beta_value(double xi) const {
        double b, db;
        beta(xi, b, db);
        return b;
    }
};

// Quadratic walls keeping xi near its useful range: zero on
// [-delta_tilde, delta_tilde], eta*(|xi|-delta_tilde)^2 outside. C^1.
struct ConfiningPotential {
    double eta = 10.0;
    double delta_tilde = 2.0;

    void validate() const {
        require(eta > 0.0 && delta_tilde > 0.0, "ConfiningPotential: parameters must be positive");
    }

    void eval(double xi, double& psi, double& dpsi_dxi) const {
        if (xi > delta_tilde) {
            const double r = xi - delta_tilde;
            psi = eta * r * r;
            dpsi_dxi = 2.0 * eta * r;
        } else if (xi < -delta_tilde) {
            const double r = xi + delta_tilde;
            psi = eta * r * r;
            dpsi_dxi = 2.0 * eta * r;
        } else {
            psi = 0.0;
            dpsi_dxi = 0.0;
        }
    }

    double value(double xi) const {
        double p, dp;
        eval(xi, p, dp);
        return p;
    }
};

struct KineticSpec {
    double mass_x = 1.0;
    double mass_xi = 1.0;

    void validate() const {
        require(mass_x > 0.0 && mass_xi > 0.0, "KineticSpec: masses must be positive");
    }
};

// Non-separable kinetic energy K = beta(xi)/(2 Mx) |px|^2 + 1/(2 Mxi) pxi^2.
struct KineticEval {
    double value = 0.0;
    Vec grad_px;
    double grad_pxi = 0.0;
    double d_dxi = 0.0;
};

inline void kinetic(const KineticSpec& kin, const TemperatureSchedule& sched, double xi,
                    const Vec& px, double pxi, KineticEval& out) {
    double b, db;
    sched.beta(xi, b, db);
    const double p2 = px.squaredNorm();
    out.value = b / (2.0 * kin.mass_x) * p2 + pxi * pxi / (2.0 * kin.mass_xi);
    out.grad_px = (b / kin.mass_x) * px;
    out.grad_pxi = pxi / kin.mass_xi;
    out.d_dxi = db / (2.0 * kin.mass_x) * p2;
}

}  // namespace ctds

#endif  // CTDS_TEMPERING_HPP
