#ifndef CTDS_CONFIG_HPP
#define CTDS_CONFIG_HPP

#include <string>
#include <vector>

#include "ctds/dynamics.hpp"
#include "ctds/energies.hpp"
#include "ctds/io.hpp"
#include "ctds/models.hpp"
#include "ctds/training.hpp"

namespace ctds {

inline const char* code_version() { return "ctds 0.1.0"; }

// Full run description. Defaults reproduce the 40-mode benchmark protocol;
// presets below fill in the per-proposal coefficients.
struct RunConfig {
    std::string name = "custom";

    // target / source
    std::uint64_t target_mean_seed = 40;
    Index target_modes = 40;
    Index dim = 2;
    double target_box = 40.0;
    double target_sigma = 0.25;
    double source_variance = 5.0;

    // path and proposal
    std::string path_kind = "learned";  // linear | learned | linear-continuum | learned-continuum
    std::string scheme = "baseline";    // baseline | overdamped | underdamped | ctds
    bool jarzynski = false;

    // integrator
    double dt_train = 0.002;
    double dt_eval = 0.004;
    double gamma_x = 50.0;
    double eps_x = 50.0;
    double gamma_xi = 5.0;
    double eps_xi = 2.0;
    double mass_x = 1.0;
    double mass_xi = 1.0;

    // tempering
    TemperatureSchedule schedule;
    ConfiningPotential confining;

    // networks
    ModelArch arch;

    // training
    Index epochs = 1250;
    Index iters_per_epoch = 100;
    Index batch_size = 6250;
    Index particles = 1000;
    Curriculum curriculum;
    AdamConfig adam;
    Index time_bins = 50;
    double buffer_retention = 0.0;
    Index checkpoint_every_epochs = 125;

    // evaluation
    Index eval_samples = 2500;
    Index eval_trials = 10;

    std::uint64_t seed = 0;
    std::string output_dir = "runs/custom";

    PathKind path_kind_enum() const {
        if (path_kind == "linear") return PathKind::Linear;
        if (path_kind == "learned") return PathKind::Learned;
        if (path_kind == "linear-continuum") return PathKind::LinearContinuum;
        if (path_kind == "learned-continuum") return PathKind::LearnedContinuum;
        throw validation_error("config: invalid field 'path' (" + path_kind + ")");
    }

    Scheme scheme_enum() const {
        if (scheme == "baseline") return Scheme::Baseline;
        if (scheme == "overdamped") return Scheme::Overdamped;
        if (scheme == "underdamped") return Scheme::Underdamped;
        if (scheme == "ctds") return Scheme::Ctds;
        throw validation_error("config: invalid field 'scheme' (" + scheme + ")");
    }

    void validate() const {
        (void)path_kind_enum();
        (void)scheme_enum();
        require(dim >= 1, "config: invalid field 'target.dim'");
        require(target_modes >= 1, "config: invalid field 'target.modes'");
        require(target_sigma > 0.0, "config: invalid field 'target.sigma'");
        require(source_variance > 0.0, "config: invalid field 'source.variance'");
        require(dt_train > 0.0, "config: invalid field 'integrator.dt_train'");
        require(dt_eval > 0.0, "config: invalid field 'integrator.dt_eval'");
        schedule.validate();
        confining.validate();
        require(arch.width >= 1 && arch.depth >= 1, "config: invalid field 'networks'");
        require(epochs >= 1, "config: invalid field 'training.epochs'");
        require(iters_per_epoch >= 1, "config: invalid field 'training.iters_per_epoch'");
        require(batch_size >= 1, "config: invalid field 'training.batch_size'");
        require(particles >= 1, "config: invalid field 'training.particles'");
        curriculum.validate();
        require(eval_samples >= 1 && eval_trials >= 1, "config: invalid field 'evaluation'");
        const bool continuum = path_kind_continuum(path_kind_enum());
        require(continuum == (scheme_enum() == Scheme::Ctds),
                "config: ctds requires a continuum path and vice versa");
    }

    ordered_json to_json() const {
        ordered_json j;
        j["name"] = name;
        j["target"] = {{"mean_seed", target_mean_seed}, {"modes", target_modes},
                       {"dim", dim},                    {"box", target_box},
                       {"sigma", target_sigma}};
        j["source"] = {{"variance", source_variance}};
        j["path"] = path_kind;
        j["scheme"] = scheme;
        j["jarzynski"] = jarzynski;
        j["integrator"] = {{"dt_train", dt_train}, {"dt_eval", dt_eval}, {"gamma_x", gamma_x},
                           {"eps_x", eps_x},       {"gamma_xi", gamma_xi}, {"eps_xi", eps_xi},
                           {"mass_x", mass_x},     {"mass_xi", mass_xi}};
        j["schedule"] = {{"beta_min", schedule.beta_min},
                         {"delta", schedule.delta},
                         {"delta_prime", schedule.delta_prime}};
        j["confining"] = {{"eta", confining.eta}, {"delta_tilde", confining.delta_tilde}};
        j["networks"] = {{"width", arch.width},
                         {"depth", arch.depth},
                         {"fourier",
                          {{"position_features", arch.fourier.position_features},
                           {"position_scale", arch.fourier.position_scale},
                           {"time_features", arch.fourier.time_features},
                           {"time_scale", arch.fourier.time_scale},
                           {"temperature_features", arch.fourier.temperature_features},
                           {"temperature_scale", arch.fourier.temperature_scale}}}};
        j["training"] = {{"epochs", epochs},
                         {"iters_per_epoch", iters_per_epoch},
                         {"batch_size", batch_size},
                         {"particles", particles},
                         {"time_bins", time_bins},
                         {"buffer_retention", buffer_retention},
                         {"checkpoint_every_epochs", checkpoint_every_epochs},
                         {"curriculum",
                          {{"horizons", curriculum.horizons},
                           {"budgets", curriculum.budgets},
                           {"final_horizon", curriculum.final_horizon}}},
                         {"adam",
                          {{"lr", adam.lr},
                           {"decay", adam.decay},
                           {"decay_every", adam.decay_every},
                           {"burn_in", adam.burn_in}}}};
        j["evaluation"] = {{"samples", eval_samples}, {"trials", eval_trials}};
        j["seed"] = seed;
        j["output_dir"] = output_dir;
        return j;
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        auto req = [](const json& o, const std::string& key, const std::string& where) -> const json& {
            auto it = o.find(key);
            require(it != o.end(), "config: missing field '" + where + "'");
            return *it;
        };
        c.name = req(j, "name", "name").get<std::string>();
        const json& t = req(j, "target", "target");
        c.target_mean_seed = req(t, "mean_seed", "target.mean_seed").get<std::uint64_t>();
        c.target_modes = req(t, "modes", "target.modes").get<Index>();
        c.dim = req(t, "dim", "target.dim").get<Index>();
        c.target_box = req(t, "box", "target.box").get<double>();
        c.target_sigma = req(t, "sigma", "target.sigma").get<double>();
        c.source_variance =
            req(req(j, "source", "source"), "variance", "source.variance").get<double>();
        c.path_kind = req(j, "path", "path").get<std::string>();
        c.scheme = req(j, "scheme", "scheme").get<std::string>();
        c.jarzynski = req(j, "jarzynski", "jarzynski").get<bool>();
        const json& in = req(j, "integrator", "integrator");
        c.dt_train = req(in, "dt_train", "integrator.dt_train").get<double>();
        c.dt_eval = req(in, "dt_eval", "integrator.dt_eval").get<double>();
        c.gamma_x = req(in, "gamma_x", "integrator.gamma_x").get<double>();
        c.eps_x = req(in, "eps_x", "integrator.eps_x").get<double>();
        c.gamma_xi = req(in, "gamma_xi", "integrator.gamma_xi").get<double>();
        c.eps_xi = req(in, "eps_xi", "integrator.eps_xi").get<double>();
        c.mass_x = req(in, "mass_x", "integrator.mass_x").get<double>();
        c.mass_xi = req(in, "mass_xi", "integrator.mass_xi").get<double>();
        const json& sc = req(j, "schedule", "schedule");
        c.schedule.beta_min = req(sc, "beta_min", "schedule.beta_min").get<double>();
        c.schedule.delta = req(sc, "delta", "schedule.delta").get<double>();
        c.schedule.delta_prime = req(sc, "delta_prime", "schedule.delta_prime").get<double>();
        const json& cf = req(j, "confining", "confining");
        c.confining.eta = req(cf, "eta", "confining.eta").get<double>();
        c.confining.delta_tilde = req(cf, "delta_tilde", "confining.delta_tilde").get<double>();
        const json& nw = req(j, "networks", "networks");
        c.arch.width = req(nw, "width", "networks.width").get<Index>();
        c.arch.depth = req(nw, "depth", "networks.depth").get<Index>();
        const json& fo = req(nw, "fourier", "networks.fourier");
        c.arch.fourier.position_features =
            req(fo, "position_features", "networks.fourier.position_features").get<Index>();
        c.arch.fourier.position_scale =
            req(fo, "position_scale", "networks.fourier.position_scale").get<double>();
        c.arch.fourier.time_features =
            req(fo, "time_features", "networks.fourier.time_features").get<Index>();
        c.arch.fourier.time_scale =
            req(fo, "time_scale", "networks.fourier.time_scale").get<double>();
        c.arch.fourier.temperature_features =
            req(fo, "temperature_features", "networks.fourier.temperature_features").get<Index>();
        c.arch.fourier.temperature_scale =
            req(fo, "temperature_scale", "networks.fourier.temperature_scale").get<double>();
        const json& tr = req(j, "training", "training");
        c.epochs = req(tr, "epochs", "training.epochs").get<Index>();
        c.iters_per_epoch = req(tr, "iters_per_epoch", "training.iters_per_epoch").get<Index>();
        c.batch_size = req(tr, "batch_size", "training.batch_size").get<Index>();
        c.particles = req(tr, "particles", "training.particles").get<Index>();
        c.time_bins = req(tr, "time_bins", "training.time_bins").get<Index>();
        c.buffer_retention =
            req(tr, "buffer_retention", "training.buffer_retention").get<double>();
        c.checkpoint_every_epochs =
            req(tr, "checkpoint_every_epochs", "training.checkpoint_every_epochs").get<Index>();
        const json& cu = req(tr, "curriculum", "training.curriculum");
        c.curriculum.horizons =
            req(cu, "horizons", "training.curriculum.horizons").get<std::vector<double>>();
        c.curriculum.budgets =
            req(cu, "budgets", "training.curriculum.budgets").get<std::vector<Index>>();
        c.curriculum.final_horizon =
            req(cu, "final_horizon", "training.curriculum.final_horizon").get<double>();
        const json& ad = req(tr, "adam", "training.adam");
        c.adam.lr = req(ad, "lr", "training.adam.lr").get<double>();
        c.adam.decay = req(ad, "decay", "training.adam.decay").get<double>();
        c.adam.decay_every = req(ad, "decay_every", "training.adam.decay_every").get<Index>();
        c.adam.burn_in = req(ad, "burn_in", "training.adam.burn_in").get<Index>();
        const json& ev = req(j, "evaluation", "evaluation");
        c.eval_samples = req(ev, "samples", "evaluation.samples").get<Index>();
        c.eval_trials = req(ev, "trials", "evaluation.trials").get<Index>();
        c.seed = req(j, "seed", "seed").get<std::uint64_t>();
        c.output_dir = req(j, "output_dir", "output_dir").get<std::string>();
        c.validate();
        return c;
    }

    // resolved manifest: config + code version; its hash ties artifacts together
    ordered_json manifest() const {
        ordered_json m;
        m["code_version"] = code_version();
        m["config"] = to_json();
        return m;
    }

    std::string manifest_hash() const { return fnv1a_hex(manifest().dump()); }

    bool is_continuum() const { return path_kind_continuum(path_kind_enum()); }

    GaussianMixture make_target() const {
        return GaussianMixture::benchmark40(target_mean_seed, target_modes, dim, target_box,
                                            target_sigma);
    }

    IsotropicGaussian make_source() const { return {dim, source_variance}; }

    Models make_models() const {
        return Models::create(dim, source_variance, is_continuum(), schedule, arch,
                              derive_seed(seed, 0xC0DE));
    }

    TrainOptions train_options() const {
        TrainOptions o;
        o.scheme = scheme_enum();
        o.path_kind = path_kind_enum();
        o.jarzynski = jarzynski;
        o.epochs = epochs;
        o.iters_per_epoch = iters_per_epoch;
        o.batch_size = batch_size;
        o.particles = particles;
        o.dt = dt_train;
        o.gamma_x = gamma_x;
        o.eps_x = eps_x;
        o.gamma_xi = gamma_xi;
        o.eps_xi = eps_xi;
        o.kinetic.mass_x = mass_x;
        o.kinetic.mass_xi = mass_xi;
        o.confining = confining;
        o.curriculum = curriculum;
        o.adam = adam;
        o.time_bins = time_bins;
        o.buffer_retention = buffer_retention;
        o.checkpoint_every_epochs = checkpoint_every_epochs;
        o.seed = derive_seed(seed, 0x7124);
        return o;
    }
};

// The seven benchmark rows: baseline, overdamped / underdamped / ctds each
// with and without Jarzynski reweighting.
inline std::vector<std::string> preset_names() {
    return {"gmm40-baseline", "gmm40-od", "gmm40-od-jar", "gmm40-ud",
            "gmm40-ud-jar",   "gmm40-ctds", "gmm40-ctds-jar"};
}

inline RunConfig preset(const std::string& name) {
    RunConfig c;
    c.name = name;
    c.output_dir = "runs/" + name;
    if (name == "gmm40-baseline") {
        c.scheme = "baseline";
        c.path_kind = "learned";
        c.jarzynski = false;
    } else if (name == "gmm40-od" || name == "gmm40-od-jar") {
        c.scheme = "overdamped";
        c.path_kind = "learned";
        c.eps_x = 50.0;
        c.jarzynski = name == "gmm40-od-jar";
    } else if (name == "gmm40-ud" || name == "gmm40-ud-jar") {
        c.scheme = "underdamped";
        c.path_kind = "learned";
        c.gamma_x = 50.0;
        c.eps_x = 2.0;
        c.jarzynski = name == "gmm40-ud-jar";
    } else if (name == "gmm40-ctds" || name == "gmm40-ctds-jar") {
        c.scheme = "ctds";
        c.path_kind = "learned-continuum";
        c.gamma_x = 50.0;
        c.eps_x = 2.0;
        c.gamma_xi = 5.0;
        c.eps_xi = 2.0;
        c.jarzynski = name == "gmm40-ctds-jar";
    } else {
        throw validation_error("unknown preset '" + name + "'");
    }
    c.validate();
    return c;
}

}  // namespace ctds

#endif  // CTDS_CONFIG_HPP
