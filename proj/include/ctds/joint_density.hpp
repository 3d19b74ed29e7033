#ifndef CTDS_JOINT_DENSITY_HPP
#define CTDS_JOINT_DENSITY_HPP

#include <cstdint>
#include <vector>

#include "ctds/energies.hpp"
#include "ctds/models.hpp"
#include "ctds/rng.hpp"
#include "ctds/state.hpp"
#include "ctds/tempering.hpp"

namespace ctds {

// Joint energy over the augmented state (x, xi):
//   Utilde(x, xi, t) = U_t^xi(x) - F_theta(t, xi) + psi_conf(xi)
// so that as F_theta -> F the xi-marginal of exp(-Utilde) flattens to
// exp(-psi_conf): uniform on the confined interval, decaying outside.
struct JointEval {
    double U = 0.0;
    Vec grad_x;
    double d_dxi = 0.0;
    double d_dt = 0.0;
};

struct JointWorkspace {
    Path::Workspace path;
    Tape fe;
    PathEval pe;
};

inline void joint_energy(const Path& path, const Models& models, const ConfiningPotential& conf,
                         const Vec& x, double xi, double t, JointWorkspace& ws, JointEval& out) {
    require(path.is_continuum(), "joint_energy: requires a continuum path");
    path.eval(x, t, xi, ws.path, ws.pe);
    const FreeEnergyEval fe = models.free_energy_eval(t, xi, ws.fe);
    double psi, dpsi;
    conf.eval(xi, psi, dpsi);
    out.U = ws.pe.U - fe.value + psi;
    out.grad_x = ws.pe.grad_x;
    out.d_dt = ws.pe.d_dt - fe.d_dt;
    out.d_dxi = ws.pe.d_dxi - fe.d_dxi + dpsi;
}

inline JointEval joint_energy(const Path& path, const Models& models,
                              const ConfiningPotential& conf, const Vec& x, double xi, double t) {
    JointWorkspace ws;
    JointEval out;
    joint_energy(path, models, conf, x, xi, t, ws, out);
    return out;
}

// Sampler for the extended initial density pi_0^dagger:
//   xi  ~ numerically normalized marginal  exp(F_theta(0,xi) - F0(xi) - psi_conf(xi))
//         by inverse CDF on a fine grid (trapezoidal normalization),
//   x   ~ N(0, (sigma0^2/beta(xi)) I),
//   px  ~ N(0, (Mx/beta(xi)) I),
//   pxi ~ N(0, Mxi).
class PiDaggerSampler {
   public:
    PiDaggerSampler(const Models& models, const ConfiningPotential& conf, const KineticSpec& kin,
                    Index grid_points = 4096, double pad = 2.0)
        : models_(&models), kin_(kin) {
        require(models.continuum(), "sample_pi_dagger: requires continuum models");
        require(grid_points >= 16, "sample_pi_dagger: grid too small");
        const double lim = conf.delta_tilde + pad;
        grid_.resize(grid_points);
        density_.resize(grid_points);
        cdf_.resize(grid_points);
        Tape ws;
        Vec logd(grid_points);
        for (Index i = 0; i < grid_points; ++i) {
            grid_[i] = -lim + 2.0 * lim * static_cast<double>(i) / (grid_points - 1);
            const auto fe = models.free_energy_eval(0.0, grid_[i], ws);
            double f0, df0;
            models.boundary_free_energy(grid_[i], f0, df0);
            double psi, dpsi;
            conf.eval(grid_[i], psi, dpsi);
            logd[i] = fe.value - f0 - psi;
        }
        const double m = logd.maxCoeff();
        require_numeric(std::isfinite(m), "sample_pi_dagger: non-finite xi log-density");
        density_ = (logd.array() - m).exp();
        const double dx = grid_[1] - grid_[0];
        cdf_[0] = 0.0;
        for (Index i = 1; i < grid_points; ++i) {
            const double inc = 0.5 * (density_[i - 1] + density_[i]) * dx;
            require_numeric(std::isfinite(inc) && inc >= 0.0,
                            "sample_pi_dagger: xi-CDF non-monotone, refine the grid");
            cdf_[i] = cdf_[i - 1] + inc;
        }
        require_numeric(cdf_[grid_points - 1] > 0.0, "sample_pi_dagger: zero-mass xi marginal");
    }

    const Vec& grid() const { return grid_; }
    const Vec& density() const { return density_; }

    double sample_xi(Rng& rng) const {
        const double target = rng.uniform() * cdf_[cdf_.size() - 1];
        // first cell whose upper CDF exceeds target
        Index lo = 0, hi = cdf_.size() - 1;
        while (lo + 1 < hi) {
            const Index mid = (lo + hi) / 2;
            if (cdf_[mid] < target)
                lo = mid;
            else
                hi = mid;
        }
        const double c0 = cdf_[lo], c1 = cdf_[hi];
        const double frac = (c1 > c0) ? (target - c0) / (c1 - c0) : 0.0;
        return grid_[lo] + frac * (grid_[hi] - grid_[lo]);
    }

    void sample_state(Rng& rng, AugmentedState& s) const {
        const Index d = models_->dim();
        s.xi = sample_xi(rng);
        const double b = models_->schedule().beta_value(s.xi);
        s.x.resize(d);
        rng.fill_gaussian(s.x);
        s.x *= std::sqrt(models_->source_variance() / b);
        s.px.resize(d);
        rng.fill_gaussian(s.px);
        s.px *= std::sqrt(kin_.mass_x / b);
        s.pxi = rng.gaussian() * std::sqrt(kin_.mass_xi);
        s.t = 0.0;
        s.work = 0.0;
    }

    std::vector<AugmentedState> sample(Index n, std::uint64_t seed) const {
        require(n >= 1, "sample_pi_dagger: n must be >= 1");
        std::vector<AugmentedState> out(n);
        for (Index i = 0; i < n; ++i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            sample_state(rng, out[i]);
        }
        return out;
    }

   private:
    const Models* models_;
    KineticSpec kin_;
    Vec grid_, density_, cdf_;
};

}  // namespace ctds

#endif  // CTDS_JOINT_DENSITY_HPP
