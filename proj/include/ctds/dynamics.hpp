#ifndef CTDS_DYNAMICS_HPP
#define CTDS_DYNAMICS_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ctds/common.hpp"
#include "ctds/parallel.hpp"
#include "ctds/rng.hpp"
#include "ctds/state.hpp"
#include "ctds/tempering.hpp"

namespace ctds {

enum class Scheme { Baseline, Overdamped, Underdamped, Ctds };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Baseline: return "baseline";
        case Scheme::Overdamped: return "overdamped";
        case Scheme::Underdamped: return "underdamped";
        case Scheme::Ctds: return "ctds";
    }
    return "?";
}

struct IntegratorConfig {
    Scheme scheme = Scheme::Overdamped;
    double dt = 0.002;
    double gamma_x = 50.0;
    double eps_x = 2.0;
    double gamma_xi = 5.0;
    double eps_xi = 2.0;
    KineticSpec kinetic;
    double horizon = 1.0;
    std::uint64_t seed = 0;

    Index steps() const {
        require(dt > 0.0, "IntegratorConfig: dt must be positive");
        require(horizon > 0.0 && horizon <= 1.0, "IntegratorConfig: horizon in (0,1]");
        const double raw = horizon / dt;
        const Index n = static_cast<Index>(std::llround(raw));
        require(n >= 1 && std::abs(n * dt - horizon) < 1e-9,
                "IntegratorConfig: horizon must be an integral number of steps");
        return n;
    }

    void validate() const {
        (void)steps();
        kinetic.validate();
        require(gamma_x >= 0.0 && eps_x >= 0.0 && gamma_xi >= 0.0 && eps_xi >= 0.0,
                "IntegratorConfig: coefficients must be non-negative");
    }
};

struct StepWorkspace {
    Vec mu, grad, noise;
    KineticEval ke;
};

// Left-point work increment shared by every scheme: the integrand of A_T
// evaluated at the pre-step state. For single-temperature schemes the energy
// is the path energy U_t; for CTDS it is the joint energy Utilde.
inline double work_increment(double div, double dU_dt, const Vec& mu, const Vec& grad,
                             double dt) {
    return (div - dU_dt - mu.dot(grad)) * dt;
}

// dX = mu dt
template <class Sys>
void step_baseline(AugmentedState& s, const Sys& sys, double dt, StepWorkspace& ws) {
    double div;
    sys.control(s.x, s.t, ws.mu, div);
    double U, dU_dt;
    sys.energy(s.x, s.t, ws.grad, U, dU_dt);
    s.work += work_increment(div, dU_dt, ws.mu, ws.grad, dt);
    s.x += dt * ws.mu;
    s.t += dt;
}

// dX = [mu + eps grad log pi_t] dt + sqrt(2 eps) dW
template <class Sys>
void step_overdamped(AugmentedState& s, const Sys& sys, const IntegratorConfig& cfg, Rng& rng,
                     StepWorkspace& ws) {
    const double dt = cfg.dt, eps = cfg.eps_x;
    double div;
    sys.control(s.x, s.t, ws.mu, div);
    double U, dU_dt;
    sys.energy(s.x, s.t, ws.grad, U, dU_dt);
    s.work += work_increment(div, dU_dt, ws.mu, ws.grad, dt);
    if (eps > 0.0) {
        s.x += dt * ws.mu + (eps * dt) * (-ws.grad);
        ws.noise.resize(s.x.size());
        rng.fill_gaussian(ws.noise);
        s.x += std::sqrt(2.0 * eps * dt) * ws.noise;
    } else {
        s.x += dt * ws.mu;  // exact baseline reduction
    }
    s.t += dt;
}

// dX = [mu + gamma M^-1 P] dt ; dP = gamma [grad log pi_t - eps M^-1 P] dt + sqrt(2 gamma eps) dW
template <class Sys>
void step_underdamped(AugmentedState& s, const Sys& sys, const IntegratorConfig& cfg, Rng& rng,
                      StepWorkspace& ws) {
    const double dt = cfg.dt, gamma = cfg.gamma_x, eps = cfg.eps_x;
    double div;
    sys.control(s.x, s.t, ws.mu, div);
    double U, dU_dt;
    sys.energy(s.x, s.t, ws.grad, U, dU_dt);
    s.work += work_increment(div, dU_dt, ws.mu, ws.grad, dt);
    if (gamma > 0.0) {
        // same expression shape as the CTDS kinetic gradient at beta = 1
        const Vec vel = (1.0 / cfg.kinetic.mass_x) * s.px;
        s.x += dt * ws.mu + (gamma * dt) * vel;
        s.px += (gamma * dt) * (-ws.grad - eps * vel);
        if (gamma * eps > 0.0) {
            ws.noise.resize(s.px.size());
            rng.fill_gaussian(ws.noise);
            s.px += std::sqrt(2.0 * gamma * eps * dt) * ws.noise;
        }
    } else {
        s.x += dt * ws.mu;  // exact baseline reduction; momentum frozen
    }
    s.t += dt;
}

// Euler-Maruyama on the augmented state (x, xi, px, pxi) under the
// non-separable Hamiltonian H = Utilde + K; noise enters momenta only.
template <class Sys>
void step_ctds(AugmentedState& s, const Sys& sys, const IntegratorConfig& cfg, Rng& rng,
               StepWorkspace& ws) {
    const double dt = cfg.dt;
    double div;
    sys.control(s.x, s.t, s.xi, ws.mu, div);
    double U, dU_dt, dU_dxi;
    sys.joint(s.x, s.xi, s.t, ws.grad, U, dU_dt, dU_dxi);
    kinetic(cfg.kinetic, sys.schedule(), s.xi, s.px, s.pxi, ws.ke);
    s.work += work_increment(div, dU_dt, ws.mu, ws.grad, dt);

    const double dH_dxi = dU_dxi + ws.ke.d_dxi;
    s.x += dt * ws.mu + (cfg.gamma_x * dt) * ws.ke.grad_px;
    s.xi += (cfg.gamma_xi * dt) * ws.ke.grad_pxi;
    s.px += (cfg.gamma_x * dt) * (-ws.grad - cfg.eps_x * ws.ke.grad_px);
    if (cfg.gamma_x * cfg.eps_x > 0.0) {
        ws.noise.resize(s.px.size());
        rng.fill_gaussian(ws.noise);
        s.px += std::sqrt(2.0 * cfg.gamma_x * cfg.eps_x * dt) * ws.noise;
    }
    s.pxi += (cfg.gamma_xi * dt) * (-dH_dxi - cfg.eps_xi * ws.ke.grad_pxi);
    if (cfg.gamma_xi * cfg.eps_xi > 0.0)
        s.pxi += std::sqrt(2.0 * cfg.gamma_xi * cfg.eps_xi * dt) * rng.gaussian();
    s.t += dt;
}

// ---------------------------------------------------------------------------
// Trajectory recording
// ---------------------------------------------------------------------------

enum class RecordMode { AllSteps, FinalOnly };

// Columnar store of trajectory snapshots (x, xi, t, work, particle id).
struct TrajectoryBatch {
    Index dim = 0;
    double dt = 0.0;
    double horizon = 0.0;
    Scheme scheme = Scheme::Baseline;
    std::vector<double> x;  // row-major: x[row*dim + i]
    std::vector<double> xi, t, work;
    std::vector<std::uint32_t> pid;
    Index n_particles = 0;
    Index n_diverged = 0;

    Index rows() const { return static_cast<Index>(t.size()); }

    void append(const AugmentedState& s, std::uint32_t particle) {
        for (Index i = 0; i < s.x.size(); ++i) x.push_back(s.x[i]);
        xi.push_back(s.xi);
        t.push_back(s.t);
        work.push_back(s.work);
        pid.push_back(particle);
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        require(f.good(), "TrajectoryBatch: cannot open " + path);
        const char magic[8] = {'C', 'T', 'D', 'S', 'T', 'R', 'J', '1'};
        f.write(magic, 8);
        auto w64 = [&](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
        auto wf = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
        w64(static_cast<std::uint64_t>(dim));
        w64(static_cast<std::uint64_t>(rows()));
        w64(static_cast<std::uint64_t>(n_particles));
        w64(static_cast<std::uint64_t>(n_diverged));
        w64(static_cast<std::uint64_t>(scheme));
        wf(dt);
        wf(horizon);
        auto warr = [&](const void* p, std::size_t bytes) {
            f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(bytes));
        };
        warr(x.data(), x.size() * 8);
        warr(xi.data(), xi.size() * 8);
        warr(t.data(), t.size() * 8);
        warr(work.data(), work.size() * 8);
        warr(pid.data(), pid.size() * 4);
        require(f.good(), "TrajectoryBatch: write failed for " + path);
    }

    static TrajectoryBatch load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        require(f.good(), "TrajectoryBatch: cannot open " + path);
        char magic[8];
        f.read(magic, 8);
        require(std::string(magic, 8) == "CTDSTRJ1", "TrajectoryBatch: bad magic in " + path);
        auto r64 = [&]() {
            std::uint64_t v;
            f.read(reinterpret_cast<char*>(&v), 8);
            return v;
        };
        auto rf = [&]() {
            double v;
            f.read(reinterpret_cast<char*>(&v), 8);
            return v;
        };
        TrajectoryBatch b;
        b.dim = static_cast<Index>(r64());
        const Index rows = static_cast<Index>(r64());
        b.n_particles = static_cast<Index>(r64());
        b.n_diverged = static_cast<Index>(r64());
        b.scheme = static_cast<Scheme>(r64());
        b.dt = rf();
        b.horizon = rf();
        b.x.resize(rows * b.dim);
        b.xi.resize(rows);
        b.t.resize(rows);
        b.work.resize(rows);
        b.pid.resize(rows);
        f.read(reinterpret_cast<char*>(b.x.data()), 8 * b.x.size());
        f.read(reinterpret_cast<char*>(b.xi.data()), 8 * rows);
        f.read(reinterpret_cast<char*>(b.t.data()), 8 * rows);
        f.read(reinterpret_cast<char*>(b.work.data()), 8 * rows);
        f.read(reinterpret_cast<char*>(b.pid.data()), 4 * rows);
        require(f.good(), "TrajectoryBatch: truncated file " + path);
        return b;
    }
};

namespace detail {

// simulate one particle; returns false if the trajectory went non-finite
template <class StepFn>
bool simulate_particle(AugmentedState& s, const StepFn& step, Index n_steps, double dt,
                       double horizon, RecordMode mode, TrajectoryBatch& out,
                       std::uint32_t particle) {
    if (mode == RecordMode::AllSteps) out.append(s, particle);
    const Index mark = out.rows() - (mode == RecordMode::AllSteps ? 1 : 0);
    for (Index k = 0; k < n_steps; ++k) {
        step(s);
        s.t = (k + 1 == n_steps) ? horizon : (k + 1) * dt;  // keep t on the exact grid
        if (!s.finite()) {
            out.x.resize(mark * out.dim);
            out.xi.resize(mark);
            out.t.resize(mark);
            out.work.resize(mark);
            out.pid.resize(mark);
            return false;
        }
        if (mode == RecordMode::AllSteps || k + 1 == n_steps) out.append(s, particle);
    }
    return true;
}

}  // namespace detail

// Simulates n independent particles of a single-temperature scheme
// (baseline / overdamped / underdamped). Particles own derived rng streams,
// so enlarging n leaves earlier trajectories unchanged.
template <class Sys, class Init>
TrajectoryBatch run_proposal(const Sys& sys, const IntegratorConfig& cfg, Index n_particles,
                             const Init& init, RecordMode mode = RecordMode::AllSteps) {
    require(n_particles >= 1, "run_proposal: need at least one particle");
    require(cfg.scheme != Scheme::Ctds, "run_proposal: use run_proposal_ctds for CTDS");
    cfg.validate();
    const Index n_steps = cfg.steps();
    TrajectoryBatch out;
    out.dt = cfg.dt;
    out.horizon = cfg.horizon;
    out.scheme = cfg.scheme;
    out.n_particles = n_particles;
    StepWorkspace ws;
    bool dim_set = false;
    for (Index p = 0; p < n_particles; ++p) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(p)));
        AugmentedState s;
        init(rng, s);
        s.t = 0.0;
        s.work = 0.0;
        if (!dim_set) {
            out.dim = s.x.size();
            dim_set = true;
        }
        auto step = [&](AugmentedState& st) {
            switch (cfg.scheme) {
                case Scheme::Baseline: step_baseline(st, sys, cfg.dt, ws); break;
                case Scheme::Overdamped: step_overdamped(st, sys, cfg, rng, ws); break;
                case Scheme::Underdamped: step_underdamped(st, sys, cfg, rng, ws); break;
                case Scheme::Ctds: break;
            }
        };
        if (!detail::simulate_particle(s, step, n_steps, cfg.dt, cfg.horizon, mode, out,
                                       static_cast<std::uint32_t>(p)))
            ++out.n_diverged;
    }
    return out;
}

template <class Sys, class Init>
TrajectoryBatch run_proposal_ctds(const Sys& sys, const IntegratorConfig& cfg, Index n_particles,
                                  const Init& init, RecordMode mode = RecordMode::AllSteps) {
    require(n_particles >= 1, "run_proposal: need at least one particle");
    require(cfg.scheme == Scheme::Ctds, "run_proposal_ctds: scheme must be ctds");
    cfg.validate();
    const Index n_steps = cfg.steps();
    TrajectoryBatch out;
    out.dt = cfg.dt;
    out.horizon = cfg.horizon;
    out.scheme = cfg.scheme;
    out.n_particles = n_particles;
    StepWorkspace ws;
    bool dim_set = false;
    for (Index p = 0; p < n_particles; ++p) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(p)));
        AugmentedState s;
        init(rng, s);
        s.t = 0.0;
        s.work = 0.0;
        if (!dim_set) {
            out.dim = s.x.size();
            dim_set = true;
        }
        auto step = [&](AugmentedState& st) { step_ctds(st, sys, cfg, rng, ws); };
        if (!detail::simulate_particle(s, step, n_steps, cfg.dt, cfg.horizon, mode, out,
                                       static_cast<std::uint32_t>(p)))
            ++out.n_diverged;
    }
    return out;
}

// Self-normalized importance-sampling diagnostics for exp(work) weights.
inline double work_ess(const std::vector<double>& work) {
    if (work.empty()) return 0.0;
    double m = work[0];
    for (double w : work) m = std::max(m, w);
    double s = 0.0, s2 = 0.0;
    for (double w : work) {
        const double e = std::exp(w - m);
        s += e;
        s2 += e * e;
    }
    return s * s / s2;
}

}  // namespace ctds

#endif  // CTDS_DYNAMICS_HPP
