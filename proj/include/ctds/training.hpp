#ifndef CTDS_TRAINING_HPP
#define CTDS_TRAINING_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctds/dynamics.hpp"
#include "ctds/energies.hpp"
#include "ctds/joint_density.hpp"
#include "ctds/models.hpp"
#include "ctds/systems.hpp"

namespace ctds {

// ---------------------------------------------------------------------------
// Continuity-equation residual (log-density form):
//   r = dF/dt - dU/dt + div mu - (grad U)^T mu
// evaluated at (x, t) or (x, t, xi) with the path / continuum energy U.
// ---------------------------------------------------------------------------

inline double pinn_residual(double dF_dt, const PathEval& pe, const Vec& mu, double div_mu) {
    return dF_dt - pe.d_dt + div_mu - pe.grad_x.dot(mu);
}

inline double pinn_residual(const Models& models, const Path& path, const Vec& x, double t,
                            std::optional<double> xi = std::nullopt) {
    Tape wc, wf;
    const auto ce = models.control_eval(x, t, xi, wc);
    const auto fe = models.free_energy_eval(t, xi, wf);
    const PathEval pe = path.eval(x, t, xi);
    return pinn_residual(fe.d_dt, pe, ce.mu, ce.div);
}

// Batched residual evaluation with reverse accumulation of the gradient over
// the shared flat parameter vector. Points are processed in fixed-size chunks
// so the gradient is reproducible and the tapes stay cache-sized.
class ResidualEvaluator {
   public:
    ResidualEvaluator(const Models& models, const Path& path, Index chunk = 256)
        : models_(&models), path_(&path), chunk_(chunk) {
        require(models.continuum() == path.is_continuum(),
                "ResidualEvaluator: models/path temperature modes differ");
    }

    // weights w are already normalized (mean one); loss = mean_i w_i r_i^2.
    // If grad is non-null it must have the full parameter size and is
    // accumulated +=.
    double loss(const Mat& x, const Vec& t, const Vec& xi, const Vec& w, Vec* grad,
                Vec* residuals_out = nullptr) {
        const Index B = t.size();
        require(B >= 1, "loss_batch: batch is empty");
        require(x.cols() == B && w.size() == B, "loss_batch: inconsistent batch arrays");
        if (residuals_out) residuals_out->resize(B);
        const bool continuum = models_->continuum();
        const bool learned = path_->is_learned();
        const Index d = models_->dim();
        double total = 0.0;
        for (Index start = 0; start < B; start += chunk_) {
            const Index n = std::min(chunk_, B - start);
            // chunk views
            xb_ = x.middleCols(start, n);
            tb_ = t.segment(start, n);
            if (continuum) {
                beta_.resize(n);
                dbeta_.resize(n);
                for (Index i = 0; i < n; ++i)
                    models_->schedule().beta(xi[start + i], beta_[i], dbeta_[i]);
            }

            BatchInput cin;
            cin.x = &xb_;
            cin.t = &tb_;
            if (continuum) {
                cin.temp = &beta_;
                cin.dtemp = &dbeta_;
            }
            const auto& cnet = models_->control_net();
            cnet.forward(models_->control_params_view(), cin, tape_c_);

            BatchInput fin;
            fin.t = &tb_;
            if (continuum) {
                fin.temp = &beta_;
                fin.dtemp = &dbeta_;
            }
            const auto& fnet = models_->free_energy_net();
            fnet.forward(models_->free_energy_params_view(), fin, tape_f_);

            const auto& unet = models_->path_corr_net();
            if (learned) {
                BatchInput uin;
                uin.x = &xb_;
                uin.t = &tb_;
                unet.forward(models_->path_corr_params_view(), uin, tape_u_);
            }

            const Mat& cy = tape_c_.output();  // d x n(1+kc)
            const Mat& fy = tape_f_.output();  // 1 x n(1+kf)
            const Index fdt = 1 + fnet.dir_t();
            if (grad) {
                adj_c_.setZero(d, cy.cols());
                adj_f_.setZero(1, fy.cols());
                if (learned) adj_u_.setZero(1, tape_u_.output().cols());
            }

            g0_.resize(d);
            g1_.resize(d);
            base_grad_.resize(d);
            for (Index i = 0; i < n; ++i) {
                const double ti = tb_[i];
                const Vec xi_pt = xb_.col(i);
                const double u0 = path_->source().energy(xi_pt, g0_);
                const double u1 = path_->target().energy(xi_pt, g1_);
                base_grad_ = (1.0 - ti) * g0_ + ti * g1_;
                double base_dt = u1 - u0;
                double uc = 0.0, uc_t = 0.0;
                const double f = ti * (1.0 - ti);
                if (learned) {
                    const Mat& uy = tape_u_.output();
                    uc = uy(0, i);
                    uc_t = uy(0, n * (1 + unet.dir_t()) + i);
                    base_dt += (1.0 - 2.0 * ti) * uc + f * uc_t;
                    for (Index j = 0; j < d; ++j) base_grad_[j] += f * uy(0, n * (1 + j) + i);
                }
                const double b = continuum ? beta_[i] : 1.0;
                double div = 0.0;
                for (Index j = 0; j < d; ++j) div += cy(j, n * (1 + j) + i);
                double mu_dot_grad = 0.0;
                for (Index j = 0; j < d; ++j) mu_dot_grad += cy(j, i) * base_grad_[j];
                const double dF_dt = fy(0, i) + ti * fy(0, fdt * n + i);
                const double r = dF_dt - b * base_dt + div - b * mu_dot_grad;
                total += w[start + i] * r * r;
                if (residuals_out) (*residuals_out)[start + i] = r;
                if (!grad) continue;

                const double rbar = 2.0 * w[start + i] * r / static_cast<double>(B);
                // free energy: dF/dt = G + t dG/dt
                adj_f_(0, i) = rbar;
                adj_f_(0, fdt * n + i) = rbar * ti;
                // control: -b (grad U)^T mu and the divergence diagonal
                for (Index j = 0; j < d; ++j) {
                    adj_c_(j, i) = -rbar * b * base_grad_[j];
                    adj_c_(j, n * (1 + j) + i) = rbar;
                }
                if (learned) {
                    adj_u_(0, i) = -rbar * b * (1.0 - 2.0 * ti);
                    adj_u_(0, n * (1 + unet.dir_t()) + i) = -rbar * b * f;
                    for (Index j = 0; j < d; ++j)
                        adj_u_(0, n * (1 + j) + i) = -rbar * b * f * cy(j, i);
                }
            }
            if (grad) {
                cnet.backward(models_->control_params_view(), tape_c_, adj_c_,
                              grad->segment(models_->control_offset(), cnet.param_count()));
                fnet.backward(models_->free_energy_params_view(), tape_f_, adj_f_,
                              grad->segment(models_->free_energy_offset(), fnet.param_count()));
                if (learned)
                    unet.backward(models_->path_corr_params_view(), tape_u_, adj_u_,
                                  grad->segment(models_->path_corr_offset(), unet.param_count()));
            }
        }
        return total / static_cast<double>(B);
    }

   private:
    const Models* models_;
    const Path* path_;
    Index chunk_;
    Mat xb_;
    Vec tb_, beta_, dbeta_;
    Tape tape_c_, tape_f_, tape_u_;
    Mat adj_c_, adj_f_, adj_u_;
    Vec g0_, g1_, base_grad_;
};

// Self-normalized exp(work) weights, stratified over equal-width time bins
// in [0, horizon]: within each bin the weights are rescaled to mean one, so
// bins contribute in proportion to their snapshot counts. Invariant under a
// constant shift of the works. Returns weights with mean one overall; ess_out
// gets the effective sample size (sum w)^2 / sum w^2.
inline Vec jarzynski_weights(const Vec& t, const Vec& work, double horizon, Index bins,
                             double* ess_out = nullptr) {
    const Index B = t.size();
    require(B >= 1 && work.size() == B, "jarzynski_weights: bad inputs");
    require(bins >= 1 && horizon > 0.0, "jarzynski_weights: bad binning");
    std::vector<std::vector<Index>> members(bins);
    for (Index i = 0; i < B; ++i) {
        Index b = static_cast<Index>(t[i] / horizon * bins);
        b = std::min(bins - 1, std::max(Index(0), b));
        members[b].push_back(i);
    }
    Vec w = Vec::Zero(B);
    double sum = 0.0, sum2 = 0.0;
    for (Index b = 0; b < bins; ++b) {
        if (members[b].empty()) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (Index i : members[b]) m = std::max(m, work[i]);
        require_numeric(std::isfinite(m), "loss_batch: non-finite work values in a time bin");
        double s = 0.0;
        for (Index i : members[b]) s += std::exp(work[i] - m);
        require_numeric(s > 0.0 && std::isfinite(s),
                        "loss_batch: degenerate Jarzynski weights (all zero) in a time bin");
        const double scale = static_cast<double>(members[b].size()) / s;
        for (Index i : members[b]) {
            w[i] = std::exp(work[i] - m) * scale;
            sum += w[i];
            sum2 += w[i] * w[i];
        }
    }
    if (ess_out) *ess_out = sum * sum / sum2;
    return w;
}

// ---------------------------------------------------------------------------
// Replay buffer: one epoch's proposal snapshots, whole-buffer replacement by
// default with an optional retention fraction.
// ---------------------------------------------------------------------------

class ReplayBuffer {
   public:
    ReplayBuffer(Index dim, Index capacity) : dim_(dim), capacity_(capacity) {
        x_.resize(dim, capacity);
        t_.resize(capacity);
        xi_.resize(capacity);
        work_.resize(capacity);
    }

    Index size() const { return size_; }
    Index capacity() const { return capacity_; }
    const Mat& x() const { return x_; }
    const Vec& t() const { return t_; }
    const Vec& xi() const { return xi_; }
    const Vec& work() const { return work_; }

    void refill(const TrajectoryBatch& traj, double retention = 0.0, Rng* rng = nullptr) {
        require(traj.dim == dim_, "ReplayBuffer: dimension mismatch");
        Index kept = 0;
        if (retention > 0.0 && size_ > 0) {
            require(rng != nullptr, "ReplayBuffer: retention needs an rng");
            kept = std::min<Index>(static_cast<Index>(retention * size_), capacity_);
            for (Index i = 0; i < kept; ++i) {
                const Index j = static_cast<Index>(rng->uniform_index(size_));
                x_.col(i) = x_.col(j);
                t_[i] = t_[j];
                xi_[i] = xi_[j];
                work_[i] = work_[j];
            }
        }
        const Index incoming = std::min<Index>(traj.rows(), capacity_ - kept);
        for (Index r = 0; r < incoming; ++r) {
            for (Index c = 0; c < dim_; ++c) x_(c, kept + r) = traj.x[r * dim_ + c];
            t_[kept + r] = traj.t[r];
            xi_[kept + r] = traj.xi[r];
            work_[kept + r] = traj.work[r];
        }
        size_ = kept + incoming;
        require(size_ >= 1, "ReplayBuffer: refill produced an empty buffer");
    }

    double max_t() const { return size_ ? t_.head(size_).maxCoeff() : 0.0; }

   private:
    Index dim_, capacity_;
    Index size_ = 0;
    Mat x_;
    Vec t_, xi_, work_;
};

// ---------------------------------------------------------------------------
// Curriculum over training horizons
// ---------------------------------------------------------------------------

struct Curriculum {
    std::vector<double> horizons = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<Index> budgets = {1000, 1000, 1000, 1000, 2000, 2000, 2000, 3000, 3000};
    double final_horizon = 1.0;

    void validate() const {
        require(horizons.size() == budgets.size(), "Curriculum: horizons/budgets size mismatch");
        for (std::size_t i = 0; i < horizons.size(); ++i) {
            require(budgets[i] > 0, "Curriculum: budgets must be positive");
            require(horizons[i] > 0.0 && horizons[i] <= 1.0, "Curriculum: horizons in (0,1]");
            if (i > 0)
                require(horizons[i] > horizons[i - 1], "Curriculum: horizons must increase");
        }
        require(final_horizon > 0.0 && final_horizon <= 1.0, "Curriculum: bad final horizon");
    }

    double horizon_at(Index iter) const {
        Index acc = 0;
        for (std::size_t i = 0; i < horizons.size(); ++i) {
            acc += budgets[i];
            if (iter < acc) return horizons[i];
        }
        return final_horizon;
    }

    static Curriculum single_stage(double horizon = 1.0) {
        Curriculum c;
        c.horizons.clear();
        c.budgets.clear();
        c.final_horizon = horizon;
        return c;
    }
};

// ---------------------------------------------------------------------------
// Adam with the stepped learning-rate decay after burn-in
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double decay = 0.97;
    Index decay_every = 1000;
    Index burn_in = 15000;
};

struct OptimState {
    Vec m, v;
    Index step = 0;

    void init(Index n) {
        m = Vec::Zero(n);
        v = Vec::Zero(n);
        step = 0;
    }

    double lr_at(Index iter, const AdamConfig& c) const {
        const Index k = iter > c.burn_in ? (iter - c.burn_in) / c.decay_every : 0;
        return c.lr * std::pow(c.decay, static_cast<double>(k));
    }

    void update(Vec& params, const Vec& grad, double lr, const AdamConfig& c) {
        require(params.size() == grad.size() && params.size() == m.size(),
                "optimizer_step: shape mismatch");
        ++step;
        m = c.beta1 * m + (1.0 - c.beta1) * grad;
        v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
        params.array() -=
            lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
    }
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainOptions {
    Scheme scheme = Scheme::Ctds;
    PathKind path_kind = PathKind::LearnedContinuum;
    bool jarzynski = true;
    Index epochs = 1250;
    Index iters_per_epoch = 100;
    Index batch_size = 6250;
    Index particles = 1000;
    double dt = 0.002;
    double gamma_x = 50.0;
    double eps_x = 2.0;
    double gamma_xi = 5.0;
    double eps_xi = 2.0;
    KineticSpec kinetic;
    ConfiningPotential confining;
    Curriculum curriculum;
    AdamConfig adam;
    Index time_bins = 50;
    double buffer_retention = 0.0;
    Index checkpoint_every_epochs = 50;
    std::uint64_t seed = 0;
    bool pretrain_histogram = true;  // record the t=1 xi sample before training (ctds)
    Index loss_chunk = 256;
};

struct TrainLogRow {
    Index iter = 0;
    Index epoch = 0;
    double horizon = 0.0;
    double loss = 0.0;
    double ess = 0.0;
    double buffer_ess = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
    Index diverged = 0;
};

struct TrainResult {
    bool ok = true;
    std::string abort_reason;
    Index iterations_run = 0;
    Index diverged_total = 0;
    std::vector<double> pretrain_xi;  // final-state xi of the untrained proposal (ctds)
};

using TrainLogSink = std::function<void(const TrainLogRow&)>;
using CheckpointSink = std::function<void(const Models&, Index epoch, bool final)>;

// One epoch's proposal simulation under the configured scheme.
inline TrajectoryBatch simulate_proposal(const TrainOptions& opt, const Models& models,
                                         const Path& path, const IsotropicGaussian& source,
                                         double horizon, std::uint64_t seed, RecordMode mode) {
    IntegratorConfig icfg;
    icfg.scheme = opt.scheme;
    icfg.dt = opt.dt;
    icfg.gamma_x = opt.gamma_x;
    icfg.eps_x = opt.eps_x;
    icfg.gamma_xi = opt.gamma_xi;
    icfg.eps_xi = opt.eps_xi;
    icfg.kinetic = opt.kinetic;
    icfg.horizon = horizon;
    icfg.seed = seed;
    if (opt.scheme == Scheme::Ctds) {
        CtdsSystem sys;
        sys.models = &models;
        sys.path = &path;
        sys.conf = &opt.confining;
        PiDaggerSampler sampler(models, opt.confining, opt.kinetic);
        PiDaggerInit init{&sampler};
        return run_proposal_ctds(sys, icfg, opt.particles, init, mode);
    }
    ModelSystem sys;
    sys.models = &models;
    sys.path = &path;
    GaussianInit init;
    init.source = &source;
    init.with_momentum = opt.scheme == Scheme::Underdamped;
    init.mass = opt.kinetic.mass_x;
    return run_proposal(sys, icfg, opt.particles, init, mode);
}

inline TrainResult train(const TrainOptions& opt, Models& models,
                         const IsotropicGaussian& source, const PointEnergy& target,
                         const TrainLogSink& log = nullptr,
                         const CheckpointSink& checkpoint = nullptr) {
    opt.curriculum.validate();
    require(opt.epochs >= 1 && opt.iters_per_epoch >= 1 && opt.batch_size >= 1 &&
                opt.particles >= 1,
            "train: bad sizes");
    const bool is_ctds = opt.scheme == Scheme::Ctds;
    require(models.continuum() == path_kind_continuum(opt.path_kind),
            "train: models/path temperature modes differ");
    require(is_ctds == path_kind_continuum(opt.path_kind),
            "train: CTDS needs a continuum path; other schemes a single-temperature path");

    Path path(opt.path_kind, source, target, &models, &models.schedule());
    ResidualEvaluator evaluator(models, path, opt.loss_chunk);

    IntegratorConfig probe;
    probe.dt = opt.dt;
    probe.horizon = 1.0;
    const Index max_steps = probe.steps();
    const Index capacity = opt.particles * (max_steps + 1);

    ReplayBuffer buffer(models.dim(), capacity);
    OptimState optim;
    optim.init(models.params.size());
    Vec grad(models.params.size());
    Mat batch_x(models.dim(), opt.batch_size);
    Vec batch_t(opt.batch_size), batch_xi(opt.batch_size), batch_w(opt.batch_size),
        batch_work(opt.batch_size);

    TrainResult result;
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        return std::chrono::duration_cast<std::chrono::duration<double>>(
                   std::chrono::steady_clock::now() - t_start)
            .count();
    };

    auto simulate = [&](double horizon, std::uint64_t seed, RecordMode mode) -> TrajectoryBatch {
        return simulate_proposal(opt, models, path, source, horizon, seed, mode);
    };

    if (is_ctds && opt.pretrain_histogram) {
        auto pre = simulate(1.0, derive_seed(opt.seed, 900001), RecordMode::FinalOnly);
        result.pretrain_xi.assign(pre.xi.begin(), pre.xi.end());
    }

    const Index total_iters = opt.epochs * opt.iters_per_epoch;
    for (Index epoch = 0; epoch < opt.epochs; ++epoch) {
        const Index iter0 = epoch * opt.iters_per_epoch;
        const double horizon = opt.curriculum.horizon_at(iter0);
        auto traj = simulate(horizon, derive_seed(opt.seed, 1000000 + epoch), RecordMode::AllSteps);
        result.diverged_total += traj.n_diverged;
        if (traj.rows() == 0) {
            if (checkpoint) checkpoint(models, epoch, true);
            result.ok = false;
            result.abort_reason = "all proposal trajectories diverged";
            result.iterations_run = iter0;
            return result;
        }
        Rng retain_rng(derive_seed(opt.seed, 3000000 + epoch));
        buffer.refill(traj, opt.buffer_retention, &retain_rng);
        std::vector<double> buf_work(buffer.work().data(), buffer.work().data() + buffer.size());
        const double buffer_ess = work_ess(buf_work);

        for (Index i = 0; i < opt.iters_per_epoch; ++i) {
            const Index iter = iter0 + i;
            Rng brng(derive_seed(opt.seed, 2000000 + iter));
            for (Index k = 0; k < opt.batch_size; ++k) {
                const Index j = static_cast<Index>(brng.uniform_index(buffer.size()));
                batch_x.col(k) = buffer.x().col(j);
                batch_t[k] = buffer.t()[j];
                batch_xi[k] = buffer.xi()[j];
                batch_work[k] = buffer.work()[j];
            }
            double ess = static_cast<double>(opt.batch_size);
            if (opt.jarzynski)
                batch_w = jarzynski_weights(batch_t, batch_work, horizon, opt.time_bins, &ess);
            else
                batch_w.setOnes();
            grad.setZero();
            const double loss = evaluator.loss(batch_x, batch_t, batch_xi, batch_w, &grad);
            if (!std::isfinite(loss)) {
                if (checkpoint) checkpoint(models, epoch, true);
                result.ok = false;
                result.abort_reason = "divergent loss at iteration " + std::to_string(iter);
                result.iterations_run = iter;
                return result;
            }
            const double lr = optim.lr_at(iter, opt.adam);
            optim.update(models.params, grad, lr, opt.adam);
            if (log) {
                TrainLogRow row;
                row.iter = iter;
                row.epoch = epoch;
                row.horizon = horizon;
                row.loss = loss;
                row.ess = ess;
                row.buffer_ess = buffer_ess;
                row.lr = lr;
                row.seconds = elapsed();
                row.diverged = traj.n_diverged;
                log(row);
            }
        }
        if (checkpoint && opt.checkpoint_every_epochs > 0 &&
            ((epoch + 1) % opt.checkpoint_every_epochs == 0))
            checkpoint(models, epoch, false);
    }
    result.iterations_run = total_iters;
    if (checkpoint) checkpoint(models, opt.epochs - 1, true);
    return result;
}

}  // namespace ctds

#endif  // CTDS_TRAINING_HPP
