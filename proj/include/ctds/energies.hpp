#ifndef CTDS_ENERGIES_HPP
#define CTDS_ENERGIES_HPP

#include <cstdint>
#include <optional>

#include "ctds/common.hpp"
#include "ctds/models.hpp"
#include "ctds/rng.hpp"
#include "ctds/tempering.hpp"

namespace ctds {

// Unnormalized energy U(x) = -log pi_hat(x) with exact gradient.
struct PointEnergy {
    virtual ~PointEnergy() = default;
    virtual Index dim() const = 0;
    virtual double energy(const Vec& x, Vec& grad) const = 0;
};

// N(0, variance I). As an energy it is the unnormalized |x|^2/(2 sigma^2);
// the normalization lives in the free energy.
class IsotropicGaussian final : public PointEnergy {
   public:
    IsotropicGaussian(Index dim, double variance) : dim_(dim), variance_(variance) {
        require(dim >= 1 && variance > 0.0, "IsotropicGaussian: bad parameters");
    }

    Index dim() const override { return dim_; }
    double variance() const { return variance_; }

    double energy(const Vec& x, Vec& grad) const override {
        grad = x / variance_;
        return x.squaredNorm() / (2.0 * variance_);
    }

    double log_density(const Vec& x) const {
        return -0.5 * dim_ * std::log(2.0 * M_PI * variance_) -
               x.squaredNorm() / (2.0 * variance_);
    }

    void sample(Rng& rng, Vec& out) const {
        out.resize(dim_);
        rng.fill_gaussian(out);
        out *= std::sqrt(variance_);
    }

    Mat sample(Index n, std::uint64_t seed) const {
        Mat out(dim_, n);
        Rng rng(seed);
        Vec col(dim_);
        for (Index j = 0; j < n; ++j) {
            sample(rng, col);
            out.col(j) = col;
        }
        return out;
    }

   private:
    Index dim_;
    double variance_;
};

// Equal-weight isotropic Gaussian mixture. The 40-mode benchmark draws the
// means i.i.d. uniform on [-box, box]^2 from a recorded seed.
class GaussianMixture final : public PointEnergy {
   public:
    GaussianMixture(Mat means, double sigma, std::uint64_t mean_seed)
        : means_(std::move(means)), sigma_(sigma), mean_seed_(mean_seed) {
        require(sigma > 0.0 && means_.cols() >= 1, "GaussianMixture: bad parameters");
    }

    static GaussianMixture benchmark40(std::uint64_t mean_seed, Index modes = 40, Index dim = 2,
                                       double box = 40.0, double sigma = 0.25) {
        Mat means(dim, modes);
        Rng rng(mean_seed);
        for (Index k = 0; k < modes; ++k)
            for (Index i = 0; i < dim; ++i) means(i, k) = (2.0 * rng.uniform() - 1.0) * box;
        return GaussianMixture(std::move(means), sigma, mean_seed);
    }

    Index dim() const override { return means_.rows(); }
    Index modes() const { return means_.cols(); }
    double sigma() const { return sigma_; }
    std::uint64_t mean_seed() const { return mean_seed_; }
    const Mat& means() const { return means_; }

    // normalized log-density (weights sum to 1), numerically stable
    double log_density(const Vec& x, Vec* grad = nullptr) const {
        const Index K = means_.cols();
        const Index d = means_.rows();
        const double s2 = sigma_ * sigma_;
        const double log_norm =
            -std::log(static_cast<double>(K)) - 0.5 * d * std::log(2.0 * M_PI * s2);
        Vec logp(K);
        for (Index k = 0; k < K; ++k)
            logp[k] = -(x - means_.col(k)).squaredNorm() / (2.0 * s2);
        const double m = logp.maxCoeff();
        const Vec e = (logp.array() - m).exp();
        const double sum = e.sum();
        if (grad) {
            grad->setZero(d);
            for (Index k = 0; k < K; ++k) *grad += e[k] * (means_.col(k) - x);
            *grad /= (sum * s2);
        }
        return log_norm + m + std::log(sum);
    }

    double energy(const Vec& x, Vec& grad) const override {
        const double lp = log_density(x, &grad);
        grad = -grad;
        return -lp;
    }

    // component by categorical draw, then Gaussian perturbation
    Mat sample(Index n, std::uint64_t seed) const {
        require(n >= 1, "GaussianMixture::sample: n must be >= 1");
        const Index K = means_.cols();
        Mat out(means_.rows(), n);
        Rng rng(seed);
        Vec z(means_.rows());
        for (Index j = 0; j < n; ++j) {
            const Index k = static_cast<Index>(rng.uniform() * K) % K;
            rng.fill_gaussian(z);
            out.col(j) = means_.col(k) + sigma_ * z;
        }
        return out;
    }

   private:
    Mat means_;
    double sigma_;
    std::uint64_t mean_seed_;
};

// Isotropic Gaussian-to-Gaussian linear energy path with everything in closed
// form: sigma_t^-2 = (1-t)/sigma0^2 + t/sigma1^2. The exact control and free
// energy make the continuity-equation residual vanish identically, which is
// the main correctness oracle.
struct GaussianOracle {
    double sigma0 = 1.0;
    double sigma1 = 2.0;
    Index dim = 2;

    double h(double t) const { return (1.0 - t) / (sigma0 * sigma0) + t / (sigma1 * sigma1); }
    double h_dot() const { return 1.0 / (sigma1 * sigma1) - 1.0 / (sigma0 * sigma0); }
    double sigma_sq(double t) const { return 1.0 / h(t); }

    // mu*(x,t) = (sigma_dot/sigma) x
    void exact_control(const Vec& x, double t, Vec& mu, double& div) const {
        const double rate = -0.5 * h_dot() / h(t);
        mu = rate * x;
        div = rate * static_cast<double>(dim);
    }

    // F_t = -log Z_t = -(d/2) log(2 pi sigma_t^2)
    double free_energy(double t) const { return -0.5 * dim * std::log(2.0 * M_PI * sigma_sq(t)); }
    double free_energy_dt(double t) const { return 0.5 * dim * h_dot() / h(t); }

    // tempered: F(t, xi) for U_t^xi = beta(xi) U_t
    double free_energy(double t, double beta) const {
        return -0.5 * dim * std::log(2.0 * M_PI * sigma_sq(t) / beta);
    }

    double z_ratio() const { return std::pow(sigma1 / sigma0, static_cast<double>(dim)); }

    IsotropicGaussian source() const { return {dim, sigma0 * sigma0}; }
    IsotropicGaussian target() const { return {dim, sigma1 * sigma1}; }
};

// ---------------------------------------------------------------------------
// Density paths / continuums
// ---------------------------------------------------------------------------

enum class PathKind { Linear, Learned, LinearContinuum, LearnedContinuum };

inline bool path_kind_continuum(PathKind k) {
    return k == PathKind::LinearContinuum || k == PathKind::LearnedContinuum;
}
inline bool path_kind_learned(PathKind k) {
    return k == PathKind::Learned || k == PathKind::LearnedContinuum;
}

struct PathEval {
    double U = 0.0;
    Vec grad_x;
    double d_dt = 0.0;
    double d_dxi = 0.0;
};

// U_t(x)        = (1-t) U0 + t U1 [+ t(1-t) Uc(x,t)]           (single temperature)
// U_t^xi(x)     = beta(xi) * U_t(x)                            (continuum)
// d/dxi U_t^xi  = beta'(xi) * U_t(x)
class Path {
   public:
    Path(PathKind kind, const PointEnergy& source, const PointEnergy& target,
         const Models* models = nullptr, const TemperatureSchedule* schedule = nullptr)
        : kind_(kind), source_(&source), target_(&target), models_(models), schedule_(schedule) {
        require(source.dim() == target.dim(), "Path: source/target dimension mismatch");
        if (path_kind_learned(kind_))
            require(models_ != nullptr, "Path: learned kinds require a correction net");
        if (path_kind_continuum(kind_))
            require(schedule_ != nullptr, "Path: continuum kinds require a temperature schedule");
    }

    bool is_continuum() const { return path_kind_continuum(kind_); }
    bool is_learned() const { return path_kind_learned(kind_); }
    PathKind kind() const { return kind_; }
    Index dim() const { return source_->dim(); }
    const PointEnergy& source() const { return *source_; }
    const PointEnergy& target() const { return *target_; }

    struct Workspace {
        Vec g0, g1;
        Tape corr;
    };

    void eval(const Vec& x, double t, std::optional<double> xi, Workspace& ws,
              PathEval& out) const {
        if (is_continuum())
            require(xi.has_value(), "path_energy: continuum energy requires xi");
        else
            require(!xi.has_value(), "path_energy: single-temperature energy rejects xi");

        const double u0 = source_->energy(x, ws.g0);
        const double u1 = target_->energy(x, ws.g1);
        double base_u = (1.0 - t) * u0 + t * u1;
        out.grad_x = (1.0 - t) * ws.g0 + t * ws.g1;
        double base_dt = u1 - u0;
        if (is_learned()) {
            const auto ce = models_->path_correction_eval(x, t, ws.corr);
            const double f = t * (1.0 - t);
            base_u += f * ce.value;
            out.grad_x += f * ce.grad_x;
            base_dt += (1.0 - 2.0 * t) * ce.value + f * ce.d_dt;
        }
        if (is_continuum()) {
            double b, db;
            schedule_->beta(*xi, b, db);
            out.U = b * base_u;
            out.grad_x *= b;
            out.d_dt = b * base_dt;
            out.d_dxi = db * base_u;
        } else {
            out.U = base_u;
            out.d_dt = base_dt;
            out.d_dxi = 0.0;
        }
    }

    PathEval eval(const Vec& x, double t, std::optional<double> xi = std::nullopt) const {
        Workspace ws;
        PathEval out;
        eval(x, t, xi, ws, out);
        return out;
    }

   private:
    PathKind kind_;
    const PointEnergy* source_;
    const PointEnergy* target_;
    const Models* models_;
    const TemperatureSchedule* schedule_;
};

}  // namespace ctds

#endif  // CTDS_ENERGIES_HPP
