#ifndef CTDS_MODELS_HPP
#define CTDS_MODELS_HPP

#include <cstdint>
#include <optional>

#include "ctds/net.hpp"
#include "ctds/tempering.hpp"

namespace ctds {

// Architecture shared by the three learnable objects.
struct FourierFeatureSpec {
    Index position_features = 100;
    double position_scale = 0.1;
    Index time_features = 20;
    double time_scale = 5.0;
    Index temperature_features = 20;
    double temperature_scale = 1.0;
};

struct ModelArch {
    Index width = 256;
    Index depth = 3;
    FourierFeatureSpec fourier;
    Activation activation = Activation::Silu;
};

struct ControlEval {
    Vec mu;
    double div = 0.0;
    Vec dmu_dt;
};

struct FreeEnergyEval {
    double value = 0.0;
    double d_dt = 0.0;
    double d_dxi = 0.0;
};

struct PathCorrectionEval {
    double value = 0.0;
    Vec grad_x;
    double d_dt = 0.0;
};

// The three learnable objects: control mu(x,t[,xi]), free energy F(t[,xi]),
// and path correction U(x,t), sharing one flat parameter vector.
//
// Temperature always enters the networks as beta(xi), not raw xi; derivative
// blocks are chained with beta'(xi) at the embedding. The free energy is
// anchored multiplicatively, F(t,xi) = F0(xi) + t*G(t,xi), so the boundary
// condition F(0,xi) = F0(xi) holds exactly for any parameters.
class Models {
   public:
    static Models create(Index dim, double source_variance, bool continuum,
                         const TemperatureSchedule& sched, const ModelArch& arch,
                         std::uint64_t seed) {
        Models m;
        m.dim_ = dim;
        m.source_variance_ = source_variance;
        m.continuum_ = continuum;
        m.schedule_ = sched;
        m.arch_ = arch;

        auto group = [](InputGroupSpec::Kind k, Index d, Index nf, double sc) {
            InputGroupSpec g;
            g.kind = k;
            g.dim = d;
            g.fourier_features = nf;
            g.fourier_scale = sc;
            return g;
        };
        const auto& f = arch.fourier;
        NetSpec control_spec;
        control_spec.groups.push_back(
            group(InputGroupSpec::Kind::Position, dim, f.position_features, f.position_scale));
        control_spec.groups.push_back(
            group(InputGroupSpec::Kind::Time, 1, f.time_features, f.time_scale));
        if (continuum)
            control_spec.groups.push_back(group(InputGroupSpec::Kind::Temperature, 1,
                                                f.temperature_features, f.temperature_scale));
        control_spec.hidden_width = arch.width;
        control_spec.depth = arch.depth;
        control_spec.output_dim = dim;
        control_spec.activation = arch.activation;

        NetSpec fe_spec;
        fe_spec.groups.push_back(group(InputGroupSpec::Kind::Time, 1, f.time_features, f.time_scale));
        if (continuum)
            fe_spec.groups.push_back(group(InputGroupSpec::Kind::Temperature, 1,
                                           f.temperature_features, f.temperature_scale));
        fe_spec.hidden_width = arch.width;
        fe_spec.depth = arch.depth;
        fe_spec.output_dim = 1;
        fe_spec.activation = arch.activation;

        NetSpec corr_spec;
        corr_spec.groups.push_back(
            group(InputGroupSpec::Kind::Position, dim, f.position_features, f.position_scale));
        corr_spec.groups.push_back(
            group(InputGroupSpec::Kind::Time, 1, f.time_features, f.time_scale));
        corr_spec.hidden_width = arch.width;
        corr_spec.depth = arch.depth;
        corr_spec.output_dim = 1;
        corr_spec.activation = arch.activation;

        m.control_ = Network::create(control_spec, derive_seed(seed, 0));
        m.free_energy_ = Network::create(fe_spec, derive_seed(seed, 1));
        m.path_corr_ = Network::create(corr_spec, derive_seed(seed, 2));
        m.params.resize(m.control_.param_count() + m.free_energy_.param_count() +
                        m.path_corr_.param_count());
        // the control starts as the zero field so training begins from the
        // uncontrolled Langevin proposal
        m.params.segment(m.control_offset(), m.control_.param_count()) =
            m.control_.init_params(derive_seed(seed, 10), /*zero_output_layer=*/true);
        m.params.segment(m.free_energy_offset(), m.free_energy_.param_count()) =
            m.free_energy_.init_params(derive_seed(seed, 11));
        m.params.segment(m.path_corr_offset(), m.path_corr_.param_count()) =
            m.path_corr_.init_params(derive_seed(seed, 12));
        return m;
    }

    static Models restore(Index dim, double source_variance, bool continuum,
                          const TemperatureSchedule& sched, const ModelArch& arch,
                          Network control, Network free_energy, Network path_corr, Vec params) {
        Models m;
        m.dim_ = dim;
        m.source_variance_ = source_variance;
        m.continuum_ = continuum;
        m.schedule_ = sched;
        m.arch_ = arch;
        m.control_ = std::move(control);
        m.free_energy_ = std::move(free_energy);
        m.path_corr_ = std::move(path_corr);
        require(params.size() == m.control_.param_count() + m.free_energy_.param_count() +
                                     m.path_corr_.param_count(),
                "Models::restore: parameter vector size mismatch");
        m.params = std::move(params);
        return m;
    }

    Index dim() const { return dim_; }
    bool continuum() const { return continuum_; }
    double source_variance() const { return source_variance_; }
    const TemperatureSchedule& schedule() const { return schedule_; }
    const ModelArch& arch() const { return arch_; }
    const Network& control_net() const { return control_; }
    const Network& free_energy_net() const { return free_energy_; }
    const Network& path_corr_net() const { return path_corr_; }

    Index control_offset() const { return 0; }
    Index free_energy_offset() const { return control_.param_count(); }
    Index path_corr_offset() const {
        return control_.param_count() + free_energy_.param_count();
    }

    Vec control_params() const { return params.segment(control_offset(), control_.param_count()); }
    Vec free_energy_params() const {
        return params.segment(free_energy_offset(), free_energy_.param_count());
    }
    Vec path_corr_params() const {
        return params.segment(path_corr_offset(), path_corr_.param_count());
    }

    // Boundary free energy of the tempered source N(0, (sigma0^2/beta) I):
    // F0(xi) = -(d/2) log(2 pi sigma0^2 / beta(xi)), with its xi-derivative.
    void boundary_free_energy(std::optional<double> xi, double& f0, double& df0_dxi) const {
        if (continuum_) {
            require(xi.has_value(), "free_energy_eval: continuum models need xi");
            double b, db;
            schedule_.beta(*xi, b, db);
            f0 = -0.5 * dim_ * std::log(2.0 * M_PI * source_variance_ / b);
            df0_dxi = 0.5 * dim_ * db / b;
        } else {
            f0 = -0.5 * dim_ * std::log(2.0 * M_PI * source_variance_);
            df0_dxi = 0.0;
        }
    }

    ControlEval control_eval(const Vec& x, double t, std::optional<double> xi, Tape& ws) const {
        PointInput in;
        in.x = &x;
        in.t = t;
        if (continuum_) {
            require(xi.has_value(), "control_eval: continuum-mode control called without xi");
            double b, db;
            schedule_.beta(*xi, b, db);
            in.temp = b;
            in.dtemp = db;
        } else {
            require(!xi.has_value(), "control_eval: single-temperature control called with xi");
        }
        AugmentedActivation out;
        control_.forward_point(control_params_view(), in, ws, out);
        ControlEval ce;
        ce.mu = std::move(out.value);
        ce.div = out.div_x;
        ce.dmu_dt = std::move(out.d_dt);
        return ce;
    }

    // Deployment control: in continuum mode the control evaluated at beta = 1.
    ControlEval deployment_control(const Vec& x, double t, Tape& ws) const {
        return control_eval(x, t, continuum_ ? std::optional<double>(0.0) : std::nullopt, ws);
    }

    FreeEnergyEval free_energy_eval(double t, std::optional<double> xi, Tape& ws) const {
        PointInput in;
        in.t = t;
        if (continuum_) {
            require(xi.has_value(), "free_energy_eval: continuum models need xi");
            double b, db;
            schedule_.beta(*xi, b, db);
            in.temp = b;
            in.dtemp = db;
        } else {
            require(!xi.has_value(), "free_energy_eval: single-temperature models reject xi");
        }
        AugmentedActivation out;
        free_energy_.forward_point(free_energy_params_view(), in, ws, out);
        double f0, df0;
        boundary_free_energy(xi, f0, df0);
        FreeEnergyEval fe;
        const double g = out.value[0];
        fe.value = f0 + t * g;
        fe.d_dt = g + t * out.d_dt[0];
        fe.d_dxi = df0 + t * out.d_dxi[0];
        return fe;
    }

    PathCorrectionEval path_correction_eval(const Vec& x, double t, Tape& ws) const {
        PointInput in;
        in.x = &x;
        in.t = t;
        AugmentedActivation out;
        path_corr_.forward_point(path_corr_params_view(), in, ws, out);
        PathCorrectionEval pe;
        pe.value = out.value[0];
        pe.grad_x = out.jac_x.row(0).transpose();
        pe.d_dt = out.d_dt[0];
        return pe;
    }

    // contiguous segment views (no copies)
    Eigen::Map<const Vec> control_params_view() const {
        return {params.data() + control_offset(), control_.param_count()};
    }
    Eigen::Map<const Vec> free_energy_params_view() const {
        return {params.data() + free_energy_offset(), free_energy_.param_count()};
    }
    Eigen::Map<const Vec> path_corr_params_view() const {
        return {params.data() + path_corr_offset(), path_corr_.param_count()};
    }

    Vec params;

   private:
    Index dim_ = 2;
    double source_variance_ = 5.0;
    bool continuum_ = false;
    TemperatureSchedule schedule_;
    ModelArch arch_;
    Network control_, free_energy_, path_corr_;
};

}  // namespace ctds

#endif  // CTDS_MODELS_HPP
