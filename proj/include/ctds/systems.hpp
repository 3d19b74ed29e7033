#ifndef CTDS_SYSTEMS_HPP
#define CTDS_SYSTEMS_HPP

#include <optional>

#include "ctds/dynamics.hpp"
#include "ctds/energies.hpp"
#include "ctds/joint_density.hpp"
#include "ctds/models.hpp"

namespace ctds {

// Single-temperature proposal system backed by the learned models and a
// density path. Workspaces are mutable: copy the system per worker when
// simulating particles concurrently.
struct ModelSystem {
    const Models* models = nullptr;
    const Path* path = nullptr;
    bool use_control = true;

    mutable Tape ctape;
    mutable Path::Workspace pws;
    mutable PathEval pe;

    void control(const Vec& x, double t, Vec& mu, double& div) const {
        if (!use_control) {
            mu.setZero(x.size());
            div = 0.0;
            return;
        }
        auto ce = models->control_eval(x, t, std::nullopt, ctape);
        mu = std::move(ce.mu);
        div = ce.div;
    }

    void energy(const Vec& x, double t, Vec& grad, double& U, double& dU_dt) const {
        path->eval(x, t, std::nullopt, pws, pe);
        grad = pe.grad_x;
        U = pe.U;
        dU_dt = pe.d_dt;
    }
};

// CTDS proposal system over the continuum path and joint energy.
struct CtdsSystem {
    const Models* models = nullptr;
    const Path* path = nullptr;
    const ConfiningPotential* conf = nullptr;
    bool use_control = true;

    mutable Tape ctape;
    mutable JointWorkspace jws;
    mutable JointEval je;

    void control(const Vec& x, double t, double xi, Vec& mu, double& div) const {
        if (!use_control) {
            mu.setZero(x.size());
            div = 0.0;
            return;
        }
        auto ce = models->control_eval(x, t, xi, ctape);
        mu = std::move(ce.mu);
        div = ce.div;
    }

    void joint(const Vec& x, double xi, double t, Vec& grad, double& U, double& dU_dt,
               double& dU_dxi) const {
        joint_energy(*path, *models, *conf, x, xi, t, jws, je);
        grad = je.grad_x;
        U = je.U;
        dU_dt = je.d_dt;
        dU_dxi = je.d_dxi;
    }

    const TemperatureSchedule& schedule() const { return models->schedule(); }
};

// Closed-form single-temperature system on the Gaussian oracle path, with the
// exact control switchable on and off. The PINN residual vanishes identically
// under (exact control, exact free energy), making this the primary
// correctness oracle for integrators and work accumulation.
struct OracleSystem {
    GaussianOracle oracle;
    bool controlled = false;

    void control(const Vec& x, double t, Vec& mu, double& div) const {
        if (controlled) {
            oracle.exact_control(x, t, mu, div);
        } else {
            mu.setZero(x.size());
            div = 0.0;
        }
    }

    void energy(const Vec& x, double t, Vec& grad, double& U, double& dU_dt) const {
        const double h = oracle.h(t);
        U = 0.5 * x.squaredNorm() * h;
        grad = h * x;
        dU_dt = 0.5 * x.squaredNorm() * oracle.h_dot();
    }
};

// Initializers for run_proposal.
struct GaussianInit {
    const IsotropicGaussian* source = nullptr;
    bool with_momentum = false;
    double mass = 1.0;

    void operator()(Rng& rng, AugmentedState& s) const {
        source->sample(rng, s.x);
        if (with_momentum) {
            s.px.resize(s.x.size());
            rng.fill_gaussian(s.px);
            s.px *= std::sqrt(mass);
        } else {
            s.px.resize(0);
        }
        s.xi = 0.0;
        s.pxi = 0.0;
    }
};

struct PiDaggerInit {
    const PiDaggerSampler* sampler = nullptr;

    void operator()(Rng& rng, AugmentedState& s) const { sampler->sample_state(rng, s); }
};

}  // namespace ctds

#endif  // CTDS_SYSTEMS_HPP
