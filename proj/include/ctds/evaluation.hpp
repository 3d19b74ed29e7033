#ifndef CTDS_EVALUATION_HPP
#define CTDS_EVALUATION_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ctds/assignment.hpp"
#include "ctds/common.hpp"
#include "ctds/energies.hpp"
#include "ctds/models.hpp"
#include "ctds/parallel.hpp"
#include "ctds/rng.hpp"
#include "ctds/tempering.hpp"

namespace ctds {

// Control field used for post-training sampling: mu and its divergence.
using ControlField = std::function<void(const Vec& x, double t, Vec& mu, double& div)>;

inline ControlField zero_control(Index dim) {
    return [dim](const Vec&, double, Vec& mu, double& div) {
        mu.setZero(dim);
        div = 0.0;
    };
}

inline ControlField oracle_control(const GaussianOracle& oracle) {
    return [oracle](const Vec& x, double t, Vec& mu, double& div) {
        oracle.exact_control(x, t, mu, div);
    };
}

// Deployment control of trained models; in continuum mode the control is
// evaluated at beta = 1.
inline ControlField deployment_control(const Models& models) {
    auto ws = std::make_shared<Tape>();
    return [&models, ws](const Vec& x, double t, Vec& mu, double& div) {
        auto ce = models.deployment_control(x, t, *ws);
        mu = std::move(ce.mu);
        div = ce.div;
    };
}

struct WeightedSampleSet {
    Mat points;       // d x n_kept
    Vec log_density;  // n_kept, log of the pushforward density at each point
    std::uint64_t seed = 0;
    Index n_requested = 0;
    Index n_diverged = 0;
};

// Euler flow of dX = mu dt from X0 ~ source, co-integrating -div mu so each
// sample carries log of its own pushforward density.
inline WeightedSampleSet generate(const ControlField& control, const IsotropicGaussian& source,
                                  Index n, double dt, std::uint64_t seed) {
    require(n >= 1, "generate: n must be >= 1");
    const Index steps = static_cast<Index>(std::llround(1.0 / dt));
    require(steps >= 1 && std::abs(steps * dt - 1.0) < 1e-9,
            "generate: 1/dt must be integral");
    WeightedSampleSet out;
    out.seed = seed;
    out.n_requested = n;
    out.points.resize(source.dim(), n);
    out.log_density.resize(n);
    Vec x(source.dim()), mu(source.dim());
    Index kept = 0;
    for (Index j = 0; j < n; ++j) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
        source.sample(rng, x);
        double ld = source.log_density(x);
        bool ok = true;
        for (Index k = 0; k < steps; ++k) {
            double div;
            control(x, k * dt, mu, div);
            ld -= div * dt;
            x += mu * dt;
            if (!x.allFinite() || !std::isfinite(ld)) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            ++out.n_diverged;
            continue;
        }
        out.points.col(kept) = x;
        out.log_density[kept] = ld;
        ++kept;
    }
    out.points.conservativeResize(Eigen::NoChange, kept);
    out.log_density.conservativeResize(kept);
    return out;
}

// Integrates the flow backward from t = 1, accumulating +div mu, and applies
// the change of variables at the reached source point. Each backward step
// inverts the forward Euler update x' = x + dt mu(x, t) by fixed-point
// iteration, so generate() and reverse_log_density() see the same discrete
// flow and the same quadrature points for the divergence integral.
// Divergent columns get -inf and are counted.
inline Vec reverse_log_density(const ControlField& control, const IsotropicGaussian& source,
                               const Mat& x1, double dt, Index* n_diverged = nullptr) {
    const Index steps = static_cast<Index>(std::llround(1.0 / dt));
    require(steps >= 1 && std::abs(steps * dt - 1.0) < 1e-9,
            "reverse_log_density: 1/dt must be integral");
    Vec out(x1.cols());
    Vec x(x1.rows()), prev(x1.rows()), mu(x1.rows());
    Index bad = 0;
    for (Index j = 0; j < x1.cols(); ++j) {
        x = x1.col(j);
        double acc = 0.0;
        bool ok = true;
        for (Index k = steps - 1; k >= 0 && ok; --k) {
            const double t = k * dt;
            // solve prev + dt mu(prev, t) = x
            double div = 0.0;
            prev = x;
            bool converged = false;
            for (int it = 0; it < 64; ++it) {
                control(prev, t, mu, div);
                const Vec next = x - dt * mu;
                const double delta = (next - prev).lpNorm<Eigen::Infinity>();
                prev = next;
                if (!prev.allFinite()) break;
                if (delta < 1e-13 * (1.0 + prev.lpNorm<Eigen::Infinity>())) {
                    converged = true;
                    break;
                }
            }
            if (!converged || !prev.allFinite()) {
                ok = false;
                break;
            }
            control(prev, t, mu, div);  // left-point divergence, matching generate()
            acc += div * dt;
            x = prev;
            if (!std::isfinite(acc)) ok = false;
        }
        if (!ok) {
            ++bad;
            out[j] = -std::numeric_limits<double>::infinity();
            continue;
        }
        out[j] = source.log_density(x) - acc;
    }
    if (n_diverged) *n_diverged = bad;
    return out;
}

// mean over model samples of log pi_hat(x) - log pi_model(x); lower-bounds log Z
inline double elbo(const WeightedSampleSet& samples,
                   const std::function<double(const Vec&)>& log_target) {
    require(samples.points.cols() >= 1, "elbo: empty sample set");
    double acc = 0.0;
    for (Index j = 0; j < samples.points.cols(); ++j)
        acc += log_target(samples.points.col(j)) - samples.log_density[j];
    return acc / static_cast<double>(samples.points.cols());
}

// mean over target samples of log pi_hat(x) - log pi_model(x); upper-bounds log Z
inline double eubo(const ControlField& control, const IsotropicGaussian& source,
                   const GaussianMixture& target, Index n, double dt, std::uint64_t seed,
                   Index* n_diverged = nullptr) {
    const Mat x = target.sample(n, seed);
    const Vec ld = reverse_log_density(control, source, x, dt, n_diverged);
    double acc = 0.0;
    Index kept = 0;
    for (Index j = 0; j < n; ++j) {
        if (!std::isfinite(ld[j])) continue;
        acc += target.log_density(x.col(j)) - ld[j];
        ++kept;
    }
    require_numeric(kept >= 1, "eubo: all reverse integrations diverged");
    return acc / static_cast<double>(kept);
}

// Exact 2-Wasserstein distance between equal-size empirical measures under
// squared Euclidean ground cost: sqrt of the mean optimally-assigned cost.
inline double wasserstein2(const Mat& a, const Mat& b) {
    require(a.cols() == b.cols(), "wasserstein2: point sets must have equal size");
    require(a.rows() == b.rows(), "wasserstein2: dimension mismatch");
    const Index n = a.cols();
    Mat cost(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) cost(i, j) = (a.col(i) - b.col(j)).squaredNorm();
    const double total = solve_assignment(cost);
    return std::sqrt(total / static_cast<double>(n));
}

// Histogram of beta(xi) over fixed equal-width bins spanning [beta_min, 1].
struct TemperatureHistogram {
    Vec edges;                // bins+1
    Eigen::VectorXi counts;   // bins

    Index total() const { return counts.sum(); }
    // fraction of mass in the two extreme bins (near beta_min and near 1)
    double extreme_fraction() const {
        const Index n = total();
        if (n == 0) return 0.0;
        return static_cast<double>(counts[0] + counts[counts.size() - 1]) / n;
    }
};

inline TemperatureHistogram temperature_histogram(const std::vector<double>& xi,
                                                  const TemperatureSchedule& sched,
                                                  int bins = 20) {
    require(bins >= 2, "temperature_histogram: need at least two bins");
    TemperatureHistogram h;
    h.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i)
        h.edges[i] = sched.beta_min + (1.0 - sched.beta_min) * i / bins;
    h.counts = Eigen::VectorXi::Zero(bins);
    for (double v : xi) {
        const double b = sched.beta_value(v);
        int k = static_cast<int>((b - sched.beta_min) / (1.0 - sched.beta_min) * bins);
        k = std::min(bins - 1, std::max(0, k));
        h.counts[k]++;
    }
    return h;
}

// Per-trial metric collection with mean/std summaries.
struct MetricsReport {
    Vec w2, elbo, eubo;  // one entry per trial
    Index n = 0;         // samples per trial
    Index trials = 0;
    std::uint64_t seed = 0;
    std::string manifest_hash;

    static double mean_of(const Vec& v) { return v.size() ? v.mean() : 0.0; }
    static double std_of(const Vec& v) {
        if (v.size() < 2) return 0.0;
        const double m = v.mean();
        return std::sqrt((v.array() - m).square().sum() / (v.size() - 1));
    }
    static double sem_of(const Vec& v) {
        return v.size() >= 2 ? std_of(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
    }

    // ELBO <= EUBO within two combined standard errors
    bool sandwich_holds() const {
        const double se = std::sqrt(sem_of(elbo) * sem_of(elbo) + sem_of(eubo) * sem_of(eubo));
        return mean_of(elbo) <= mean_of(eubo) + 2.0 * se;
    }
};

struct EvalOptions {
    Index n = 2500;
    Index trials = 10;
    double dt = 0.004;
    std::uint64_t seed = 0;
};

// W2 / ELBO / EUBO over independent trials. Trials run in parallel when
// CTDS_THREADS > 1; per-trial seeds make the result independent of threading.
inline MetricsReport run_metrics(const ControlField& control, const IsotropicGaussian& source,
                                 const GaussianMixture& target, const EvalOptions& opt,
                                 Mat* first_trial_samples = nullptr) {
    require(opt.trials >= 1, "cmd_eval: trial count must be >= 1");
    MetricsReport report;
    report.n = opt.n;
    report.trials = opt.trials;
    report.seed = opt.seed;
    report.w2.resize(opt.trials);
    report.elbo.resize(opt.trials);
    report.eubo.resize(opt.trials);
    std::vector<Mat> kept(first_trial_samples ? 1 : 0);
    parallel_chunks(opt.trials, 1, [&](Index trial, Index, Index) {
        const std::uint64_t s = derive_seed(opt.seed, 0xEA1, static_cast<std::uint64_t>(trial));
        auto set = generate(control, source, opt.n, opt.dt, derive_seed(s, 1));
        require_numeric(set.points.cols() >= 1, "cmd_eval: all generated samples diverged");
        const Mat ref = target.sample(set.points.cols(), derive_seed(s, 2));
        report.w2[trial] = wasserstein2(set.points, ref);
        report.elbo[trial] = elbo(set, [&](const Vec& x) { return target.log_density(x); });
        report.eubo[trial] =
            eubo(control, source, target, opt.n, opt.dt, derive_seed(s, 3));
        if (first_trial_samples && trial == 0) *first_trial_samples = set.points;
    });
    return report;
}

}  // namespace ctds

#endif  // CTDS_EVALUATION_HPP
