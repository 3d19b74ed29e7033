#ifndef CTDS_VERIFY_HPP
#define CTDS_VERIFY_HPP

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "ctds/dynamics.hpp"
#include "ctds/evaluation.hpp"
#include "ctds/systems.hpp"
#include "ctds/training.hpp"

namespace ctds {

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string relation = "<";  // pass iff measured RELATION threshold
    double seconds = 0.0;
    std::string detail;
};

namespace detail {

inline double now_seconds() {
    return std::chrono::duration_cast<std::chrono::duration<double>>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Timer {
    double t0 = now_seconds();
    double elapsed() const { return now_seconds() - t0; }
};

inline double fd(const std::function<double(double)>& f, double x, double h = 1e-4) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double relerr(double a, double b, double floor = 1e-3) {
    return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

}  // namespace detail

// Closed-form CTDS system on the tempered Gaussian oracle: joint energy
// Utilde = beta U_t - F0(xi) + psi_conf with the exact boundary free energy.
// No networks involved, which keeps the long Jarzynski runs cheap.
struct OracleCtdsSystem {
    GaussianOracle oracle;
    TemperatureSchedule sched;
    ConfiningPotential conf;

    void control(const Vec& x, double, double, Vec& mu, double& div) const {
        mu.setZero(x.size());
        div = 0.0;
    }

    void joint(const Vec& x, double xi, double t, Vec& grad, double& U, double& dU_dt,
               double& dU_dxi) const {
        double b, db;
        sched.beta(xi, b, db);
        const double h = oracle.h(t);
        const double base = 0.5 * x.squaredNorm() * h;
        const double f0 = -0.5 * oracle.dim *
                          std::log(2.0 * M_PI * oracle.sigma0 * oracle.sigma0 / b);
        const double df0 = 0.5 * oracle.dim * db / b;
        double psi, dpsi;
        conf.eval(xi, psi, dpsi);
        U = b * base - f0 + psi;
        grad = (b * h) * x;
        dU_dt = b * 0.5 * x.squaredNorm() * oracle.h_dot();
        dU_dxi = db * base - df0 + dpsi;
    }

    const TemperatureSchedule& schedule() const { return sched; }
};

// ---------------------------------------------------------------------------
// Named checks (each one property, with its measured value and tolerance)
// ---------------------------------------------------------------------------

// |continuity residual| under the exact control/free-energy pair
inline CheckResult check_oracle_zero_residual(Index n_points = 1000, std::uint64_t seed = 71) {
    detail::Timer timer;
    GaussianOracle oracle;
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    Path path(PathKind::Linear, os, ot);
    Rng rng(seed);
    double worst = 0.0;
    for (Index i = 0; i < n_points; ++i) {
        Vec x = 2.0 * rng.gaussian_vec(oracle.dim);
        const double t = rng.uniform();
        Vec mu;
        double div;
        oracle.exact_control(x, t, mu, div);
        const PathEval pe = path.eval(x, t);
        worst = std::max(worst, std::abs(pinn_residual(oracle.free_energy_dt(t), pe, mu, div)));
    }
    CheckResult r{"oracle-pinn-zero-residual", worst < 1e-10, worst, 1e-10, "<", timer.elapsed(),
                  std::to_string(n_points) + " random (x,t) points"};
    return r;
}

// E[exp(A_T)] for uncontrolled overdamped annealing vs the closed-form Z1/Z0;
// flip_work_sign is the mutation hook used to prove the check has teeth.
inline CheckResult check_jarzynski_overdamped(Index n_particles = 100000, double dt = 1e-3,
                                              std::uint64_t seed = 73,
                                              bool flip_work_sign = false) {
    detail::Timer timer;
    OracleSystem sys;  // uncontrolled
    IsotropicGaussian src = sys.oracle.source();
    IntegratorConfig cfg;
    cfg.scheme = Scheme::Overdamped;
    cfg.eps_x = 50.0;
    cfg.dt = dt;
    cfg.horizon = 1.0;
    cfg.seed = seed;
    GaussianInit init;
    init.source = &src;
    auto batch = run_proposal(sys, cfg, n_particles, init, RecordMode::FinalOnly);
    double z = 0.0;
    for (double w : batch.work) z += std::exp(flip_work_sign ? -w : w);
    z /= static_cast<double>(batch.rows());
    const double rel = std::abs(z - sys.oracle.z_ratio()) / sys.oracle.z_ratio();
    CheckResult r{"jarzynski-z-ratio-overdamped", rel < 0.05, rel, 0.05, "<", timer.elapsed(),
                  "estimate " + std::to_string(z) + " vs 4 (N=" + std::to_string(n_particles) +
                      ", dt=" + std::to_string(dt) + ")"};
    return r;
}

// Same identity along CTDS with xi frozen on the beta = 1 plateau.
inline CheckResult check_jarzynski_ctds_frozen(Index n_particles = 100000, double dt = 1e-3,
                                               std::uint64_t seed = 79) {
    detail::Timer timer;
    OracleCtdsSystem sys;
    IntegratorConfig cfg;
    cfg.scheme = Scheme::Ctds;
    cfg.gamma_x = 50.0;
    cfg.eps_x = 2.0;
    cfg.gamma_xi = 0.0;  // frozen xi
    cfg.eps_xi = 2.0;
    cfg.dt = dt;
    cfg.horizon = 1.0;
    cfg.seed = seed;
    const double s0 = sys.oracle.sigma0;
    auto init = [&](Rng& rng, AugmentedState& s) {
        s.x = s0 * rng.gaussian_vec(sys.oracle.dim);
        s.px = rng.gaussian_vec(sys.oracle.dim);  // N(0, Mx/beta), beta(0)=1, Mx=1
        s.xi = 0.0;
        s.pxi = rng.gaussian();
    };
    auto batch = run_proposal_ctds(sys, cfg, n_particles, init, RecordMode::FinalOnly);
    double z = 0.0;
    for (double w : batch.work) z += std::exp(w);
    z /= static_cast<double>(batch.rows());
    const double rel = std::abs(z - sys.oracle.z_ratio()) / sys.oracle.z_ratio();
    CheckResult r{"jarzynski-z-ratio-ctds-frozen-xi", rel < 0.05, rel, 0.05, "<", timer.elapsed(),
                  "estimate " + std::to_string(z) + " vs 4 (N=" + std::to_string(n_particles) +
                      ", dt=" + std::to_string(dt) + ")"};
    return r;
}

namespace detail {

inline ModelArch verify_arch() {
    ModelArch a;
    a.width = 12;
    a.depth = 2;
    a.fourier.position_features = 4;
    a.fourier.position_scale = 0.5;
    a.fourier.time_features = 3;
    a.fourier.time_scale = 2.0;
    a.fourier.temperature_features = 3;
    a.fourier.temperature_scale = 1.0;
    return a;
}

// control jacobian entry read off the augmented forward pass
inline Mat control_jacobian(const Models& models, const Vec& x, double t, double xi) {
    Tape ws;
    PointInput in;
    in.x = &x;
    in.t = t;
    double b, db;
    models.schedule().beta(xi, b, db);
    in.temp = b;
    in.dtemp = db;
    AugmentedActivation out;
    models.control_net().forward_point(models.control_params_view(), in, ws, out);
    return out.jac_x;
}

}  // namespace detail

// Bitwise scheme reductions: OD(eps=0) and UD(gamma=0) against the baseline
// ODE, and CTDS with frozen xi on the beta=1 plateau against UD.
inline CheckResult check_scheme_reductions() {
    detail::Timer timer;
    double worst = 0.0;
    std::string detail_msg;

    {
        OracleSystem sys;
        sys.controlled = true;
        IsotropicGaussian src = sys.oracle.source();
        GaussianInit init;
        init.source = &src;
        init.with_momentum = true;
        IntegratorConfig od;
        od.scheme = Scheme::Overdamped;
        od.eps_x = 0.0;
        od.dt = 0.002;
        od.horizon = 0.1;
        od.seed = 5;
        IntegratorConfig base = od;
        base.scheme = Scheme::Baseline;
        IntegratorConfig ud = od;
        ud.scheme = Scheme::Underdamped;
        ud.gamma_x = 0.0;
        ud.eps_x = 2.0;
        auto a = run_proposal(sys, od, 8, init);
        auto b = run_proposal(sys, base, 8, init);
        auto c = run_proposal(sys, ud, 8, init);
        for (std::size_t i = 0; i < a.x.size(); ++i) {
            worst = std::max(worst, std::abs(a.x[i] - b.x[i]));
            worst = std::max(worst, std::abs(c.x[i] - b.x[i]));
        }
    }
    {
        // CTDS (gamma_xi = 0, xi on the inner plateau) vs underdamped
        auto single = Models::create(2, 1.0, false, TemperatureSchedule{}, detail::verify_arch(), 3);
        auto cont = Models::create(2, 1.0, true, TemperatureSchedule{}, detail::verify_arch(), 4);
        cont.params.segment(cont.free_energy_offset(), cont.free_energy_net().param_count())
            .setZero();
        IsotropicGaussian os(2, 1.0), ot(2, 4.0);
        TemperatureSchedule sched;
        ConfiningPotential conf;
        Path linear(PathKind::Linear, os, ot);
        Path linear_cont(PathKind::LinearContinuum, os, ot, nullptr, &sched);
        ModelSystem ud_sys;
        ud_sys.models = &single;
        ud_sys.path = &linear;
        ud_sys.use_control = false;
        CtdsSystem ctds_sys;
        ctds_sys.models = &cont;
        ctds_sys.path = &linear_cont;
        ctds_sys.conf = &conf;
        ctds_sys.use_control = false;
        IntegratorConfig ud;
        ud.scheme = Scheme::Underdamped;
        ud.gamma_x = 50.0;
        ud.eps_x = 2.0;
        ud.dt = 0.002;
        IntegratorConfig ct = ud;
        ct.scheme = Scheme::Ctds;
        ct.gamma_xi = 0.0;
        AugmentedState a, b;
        a.x = Vec(2);
        a.x << 0.3, -0.4;
        a.px = Vec(2);
        a.px << 0.5, 0.2;
        b = a;
        b.xi = 0.0;
        b.pxi = 0.4;
        Rng ra(11), rb(11);
        StepWorkspace wa, wb;
        for (int k = 0; k < 50; ++k) {
            step_underdamped(a, ud_sys, ud, ra, wa);
            step_ctds(b, ctds_sys, ct, rb, wb);
            worst = std::max(worst, (a.x - b.x).lpNorm<Eigen::Infinity>());
            worst = std::max(worst, (a.px - b.px).lpNorm<Eigen::Infinity>());
            worst = std::max(worst, std::abs(a.work - b.work));
        }
    }
    CheckResult r{"scheme-reductions-bitwise", worst == 0.0, worst, 0.0, "==", timer.elapsed(),
                  "OD(eps=0)/UD(gamma=0) vs baseline; CTDS(frozen xi, beta=1) vs UD"};
    return r;
}

// Derivative exactness across networks, path energies, and joint energy
// against central finite differences, plus the full loss gradient against
// finite differences over parameters.
inline CheckResult check_derivative_exactness(Index n_draws = 100, std::uint64_t seed = 83) {
    detail::Timer timer;
    auto models = Models::create(2, 1.0, true, TemperatureSchedule{}, detail::verify_arch(), 31);
    Rng prng(32);
    for (Index i = 0; i < models.params.size(); ++i) models.params[i] = 0.3 * prng.gaussian();
    GaussianOracle oracle;
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    TemperatureSchedule sched;
    ConfiningPotential conf;
    Path path(PathKind::LearnedContinuum, os, ot, &models, &sched);

    double worst = 0.0;
    Rng rng(seed);
    Tape ws;
    for (Index i = 0; i < n_draws; ++i) {
        Vec x = rng.gaussian_vec(2);
        const double t = 0.05 + 0.9 * rng.uniform();
        const double xi = 4.0 * (rng.uniform() - 0.5);
        const auto fe = models.free_energy_eval(t, xi, ws);
        const auto pe = path.eval(x, t, xi);
        const auto je = joint_energy(path, models, conf, x, xi, t);
        const Mat jac = detail::control_jacobian(models, x, t, xi);
        for (Index c = 0; c < 2; ++c) {
            for (Index k = 0; k < 2; ++k) {
                const double fdv = detail::fd(
                    [&](double v) {
                        Vec xp = x;
                        xp[c] = v;
                        Tape w2;
                        return models.control_eval(xp, t, xi, w2).mu[k];
                    },
                    x[c]);
                worst = std::max(worst, detail::relerr(jac(k, c), fdv));
            }
            worst = std::max(worst, detail::relerr(pe.grad_x[c], detail::fd([&](double v) {
                                                       Vec xp = x;
                                                       xp[c] = v;
                                                       return path.eval(xp, t, xi).U;
                                                   },
                                                                            x[c])));
            worst = std::max(worst, detail::relerr(je.grad_x[c], detail::fd([&](double v) {
                                                       Vec xp = x;
                                                       xp[c] = v;
                                                       return joint_energy(path, models, conf, xp,
                                                                           xi, t)
                                                           .U;
                                                   },
                                                                            x[c])));
        }
        worst = std::max(
            worst, detail::relerr(fe.d_dt, detail::fd(
                                               [&](double v) {
                                                   Tape w2;
                                                   return models.free_energy_eval(v, xi, w2).value;
                                               },
                                               t)));
        worst = std::max(
            worst, detail::relerr(pe.d_dt,
                                  detail::fd([&](double v) { return path.eval(x, v, xi).U; }, t)));
        worst = std::max(
            worst,
            detail::relerr(je.d_dxi, detail::fd(
                                         [&](double v) {
                                             return joint_energy(path, models, conf, x, v, t).U;
                                         },
                                         xi)));

    }

    // parameter gradient of the residual loss
    ResidualEvaluator eval(models, path, 7);
    const Index B = 9;
    Mat bx(2, B);
    Vec bt(B), bxi(B), bw = Vec::Ones(B);
    for (Index i = 0; i < B; ++i) {
        bx.col(i) = rng.gaussian_vec(2);
        bt[i] = 0.1 + 0.8 * rng.uniform();
        bxi[i] = 3.0 * (rng.uniform() - 0.5);
    }
    Vec grad = Vec::Zero(models.params.size());
    eval.loss(bx, bt, bxi, bw, &grad);
    double worst_grad = 0.0;
    for (Index i = 0; i < models.params.size(); i += 17) {
        const double h = 1e-5;
        const double orig = models.params[i];
        models.params[i] = orig + h;
        const double up = eval.loss(bx, bt, bxi, bw, nullptr);
        models.params[i] = orig - h;
        const double dn = eval.loss(bx, bt, bxi, bw, nullptr);
        models.params[i] = orig;
        worst_grad = std::max(worst_grad, detail::relerr(grad[i], (up - dn) / (2.0 * h), 1e-2));
    }

    const bool pass = worst < 1e-5 && worst_grad < 1e-4;
    CheckResult r{"derivative-exactness", pass, std::max(worst, worst_grad), 1e-5, "<",
                  timer.elapsed(),
                  "field partials worst rel err " + std::to_string(worst) +
                      "; loss-gradient worst rel err " + std::to_string(worst_grad) +
                      " (tol 1e-4)"};
    return r;
}

// beta / psi_conf closed-form spot values with the benchmark parameters
inline CheckResult check_beta_psi_spot_values() {
    detail::Timer timer;
    TemperatureSchedule sched;
    ConfiningPotential conf;
    double b, db, psi, dpsi;
    double worst = 0.0;
    sched.beta(1.075, b, db);
    worst = std::max(worst, std::abs(b - 0.6));
    sched.beta(3.0, b, db);
    worst = std::max(worst, std::abs(b - 0.2));
    worst = std::max(worst, std::abs(db));
    sched.beta(-3.0, b, db);
    worst = std::max(worst, std::abs(b - 0.2));
    conf.eval(2.5, psi, dpsi);
    worst = std::max(worst, std::abs(psi - 2.5));
    worst = std::max(worst, std::abs(dpsi - 10.0));
    CheckResult r{"beta-psi-spot-values", worst < 1e-12, worst, 1e-12, "<", timer.elapsed(),
                  "beta(1.075)=0.6, beta(+-3)=0.2, psi(2.5)=2.5"};
    return r;
}

// exact W2 vs brute-force enumeration on small point sets
inline CheckResult check_w2_bruteforce(Index n_instances = 100, std::uint64_t seed = 89) {
    detail::Timer timer;
    Rng rng(seed);
    double worst = 0.0;
    for (Index trial = 0; trial < n_instances; ++trial) {
        const Index n = 2 + trial % 5;
        Mat a(2, n), b(2, n);
        for (Index j = 0; j < n; ++j) {
            a.col(j) = 2.0 * rng.gaussian_vec(2);
            b.col(j) = 2.0 * rng.gaussian_vec(2);
        }
        std::vector<Index> perm(n);
        for (Index i = 0; i < n; ++i) perm[i] = i;
        double best = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (Index i = 0; i < n; ++i) c += (a.col(i) - b.col(perm[i])).squaredNorm();
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        worst = std::max(worst,
                         detail::relerr(wasserstein2(a, b), std::sqrt(best / n), 1e-9));
    }
    CheckResult r{"w2-exact-vs-bruteforce", worst < 1e-10, worst, 1e-10, "<", timer.elapsed(),
                  std::to_string(n_instances) + " instances, sizes 2..6"};
    return r;
}

// Criterion-style training run on the Gaussian oracle: overdamped proposal on
// the linear path, flat curriculum, modest networks. After `iterations` Adam
// steps the learned free energy must match the closed form on a t-grid, and
// the mean squared residual must have dropped by two orders of magnitude.
struct OracleTrainingOutcome {
    CheckResult free_energy;
    CheckResult residual_drop;
    Models models;
    std::vector<double> losses;
};

inline OracleTrainingOutcome check_oracle_training(Index iterations = 2000,
                                                   std::uint64_t seed = 97,
                                                   bool continuum = false) {
    detail::Timer timer;
    GaussianOracle oracle;
    IsotropicGaussian src = oracle.source(), tgt = oracle.target();
    TemperatureSchedule sched;

    ModelArch arch;
    arch.width = 64;
    arch.depth = 2;
    arch.fourier.position_features = 16;
    arch.fourier.position_scale = 0.3;
    arch.fourier.time_features = 8;
    arch.fourier.time_scale = 2.0;
    arch.fourier.temperature_features = 6;
    arch.fourier.temperature_scale = 1.0;
    OracleTrainingOutcome out{
        {}, {}, Models::create(2, src.variance(), continuum, sched, arch, seed), {}};

    TrainOptions opt;
    opt.scheme = continuum ? Scheme::Ctds : Scheme::Overdamped;
    opt.path_kind = continuum ? PathKind::LinearContinuum : PathKind::Linear;
    opt.jarzynski = false;
    opt.iters_per_epoch = 100;
    opt.epochs = iterations / opt.iters_per_epoch;
    opt.batch_size = 512;
    opt.particles = 256;
    opt.dt = 0.005;
    opt.eps_x = continuum ? 2.0 : 50.0;
    opt.gamma_x = 50.0;
    opt.gamma_xi = 5.0;
    opt.eps_xi = 2.0;
    opt.curriculum = Curriculum::single_stage(1.0);
    opt.adam.lr = 3e-3;
    opt.adam.burn_in = iterations / 2;
    opt.adam.decay_every = 250;
    opt.checkpoint_every_epochs = 0;
    opt.pretrain_histogram = false;
    opt.seed = derive_seed(seed, 1);

    auto res = train(opt, out.models, src, tgt,
                     [&](const TrainLogRow& r) { out.losses.push_back(r.loss); });
    require_numeric(res.ok, "oracle training aborted: " + res.abort_reason);

    // Theorem: the anchored minimizer is the true free energy
    double worst = 0.0;
    Tape ws;
    for (int i = 0; i <= 100; ++i) {
        const double t = i / 100.0;
        if (continuum) {
            for (int k = 0; k <= 24; ++k) {
                const double xi = -2.4 + 4.8 * k / 24.0;
                const auto fe = out.models.free_energy_eval(t, xi, ws);
                const double exact = oracle.free_energy(t, sched.beta_value(xi));
                worst = std::max(worst, std::abs(fe.value - exact));
            }
        } else {
            const auto fe = out.models.free_energy_eval(t, std::nullopt, ws);
            worst = std::max(worst, std::abs(fe.value - oracle.free_energy(t)));
        }
    }
    out.free_energy = {continuum ? "theorem-free-energy-uniqueness-multi-temperature"
                                 : "theorem-free-energy-uniqueness",
                       worst < 1e-2,
                       worst,
                       1e-2,
                       "<",
                       timer.elapsed(),
                       std::string("max |F_learned - F_closed_form| over a ") +
                           (continuum ? "(t, xi)" : "t") + " grid after " +
                           std::to_string(iterations) + " iterations"};

    const double first = out.losses.front();
    double tail = 0.0;
    const std::size_t k = std::min<std::size_t>(50, out.losses.size());
    for (std::size_t i = out.losses.size() - k; i < out.losses.size(); ++i) tail += out.losses[i];
    tail /= static_cast<double>(k);
    const double ratio = first / std::max(tail, 1e-300);
    out.residual_drop = {"oracle-training-residual-drop",
                         ratio >= 100.0,
                         ratio,
                         100.0,
                         ">=",
                         timer.elapsed(),
                         "initial loss " + std::to_string(first) + " vs trailing mean " +
                             std::to_string(tail)};
    return out;
}

// Fast verification suite (the slow training-based checks live in the
// acceptance binary).
inline std::vector<CheckResult> verify_core(Index jarzynski_particles = 20000) {
    std::vector<CheckResult> out;
    out.push_back(check_oracle_zero_residual());
    out.push_back(check_jarzynski_overdamped(jarzynski_particles));
    out.push_back(check_jarzynski_ctds_frozen(jarzynski_particles));
    out.push_back(check_scheme_reductions());
    out.push_back(check_derivative_exactness());
    out.push_back(check_beta_psi_spot_values());
    out.push_back(check_w2_bruteforce());
    return out;
}

}  // namespace ctds

#endif  // CTDS_VERIFY_HPP
