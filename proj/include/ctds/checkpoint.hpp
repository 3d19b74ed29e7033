#ifndef CTDS_CHECKPOINT_HPP
#define CTDS_CHECKPOINT_HPP

#include <string>

#include "ctds/io.hpp"
#include "ctds/models.hpp"

namespace ctds {

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline std::string group_kind_name(InputGroupSpec::Kind k) {
    switch (k) {
        case InputGroupSpec::Kind::Position: return "position";
        case InputGroupSpec::Kind::Time: return "time";
        case InputGroupSpec::Kind::Temperature: return "temperature";
    }
    return "?";
}

inline InputGroupSpec::Kind group_kind_from(const std::string& s) {
    if (s == "position") return InputGroupSpec::Kind::Position;
    if (s == "time") return InputGroupSpec::Kind::Time;
    if (s == "temperature") return InputGroupSpec::Kind::Temperature;
    throw validation_error("checkpoint: unknown input group kind '" + s + "'");
}

inline ordered_json net_to_json(const Network& net, Eigen::Ref<const Vec> params) {
    ordered_json j;
    ordered_json groups = ordered_json::array();
    for (const auto& g : net.spec().groups) {
        groups.push_back({{"kind", group_kind_name(g.kind)},
                          {"dim", g.dim},
                          {"fourier_features", g.fourier_features},
                          {"fourier_scale", g.fourier_scale}});
    }
    j["groups"] = groups;
    j["width"] = net.spec().hidden_width;
    j["depth"] = net.spec().depth;
    j["output_dim"] = net.spec().output_dim;
    j["activation"] = net.spec().activation == Activation::Silu ? "silu" : "tanh";
    ordered_json maps = ordered_json::array();
    for (const auto& m : net.fourier_maps()) {
        maps.push_back({{"seed", m.seed()},
                        {"frequency_scale", m.frequency_scale()},
                        {"num_features", m.num_features()},
                        {"frequencies_b64", encode_doubles(m.frequencies())}});
    }
    j["fourier"] = maps;
    Vec p = params;
    j["params_b64"] = encode_doubles(p);
    return j;
}

inline Network net_from_json(const json& j) {
    NetSpec spec;
    for (const auto& g : j.at("groups")) {
        InputGroupSpec gs;
        gs.kind = group_kind_from(g.at("kind").get<std::string>());
        gs.dim = g.at("dim").get<Index>();
        gs.fourier_features = g.at("fourier_features").get<Index>();
        gs.fourier_scale = g.at("fourier_scale").get<double>();
        spec.groups.push_back(gs);
    }
    spec.hidden_width = j.at("width").get<Index>();
    spec.depth = j.at("depth").get<Index>();
    spec.output_dim = j.at("output_dim").get<Index>();
    spec.activation =
        j.at("activation").get<std::string>() == "silu" ? Activation::Silu : Activation::Tanh;
    std::vector<FourierMap> maps;
    std::size_t gi = 0;
    for (const auto& m : j.at("fourier")) {
        const Index nf = m.at("num_features").get<Index>();
        const Index in_dim = spec.groups[gi].dim;
        Mat freq(nf, in_dim);
        const Vec flat = decode_doubles(m.at("frequencies_b64").get<std::string>(), nf * in_dim);
        std::memcpy(freq.data(), flat.data(), sizeof(double) * flat.size());
        maps.push_back(FourierMap::restore(in_dim, nf, m.at("frequency_scale").get<double>(),
                                           m.at("seed").get<std::uint64_t>(), std::move(freq)));
        ++gi;
    }
    return Network::restore(spec, std::move(maps));
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Models& models,
                            const std::string& manifest_hash) {
    ordered_json j;
    j["kind"] = "ctds-checkpoint";
    j["format_version"] = kCheckpointFormatVersion;
    j["manifest_hash"] = manifest_hash;
    j["dim"] = models.dim();
    j["source_variance"] = models.source_variance();
    j["continuum"] = models.continuum();
    j["schedule"] = {{"beta_min", models.schedule().beta_min},
                     {"delta", models.schedule().delta},
                     {"delta_prime", models.schedule().delta_prime}};
    j["networks"] = {
        {"control", detail::net_to_json(models.control_net(), models.control_params_view())},
        {"free_energy",
         detail::net_to_json(models.free_energy_net(), models.free_energy_params_view())},
        {"path_correction",
         detail::net_to_json(models.path_corr_net(), models.path_corr_params_view())}};
    write_text_file(path, j.dump(2) + "\n");
}

struct Checkpoint {
    Models models;
    std::string manifest_hash;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    const json j = read_json_file(path);
    require(j.value("kind", "") == "ctds-checkpoint", "checkpoint: not a checkpoint file: " + path);
    require(j.at("format_version").get<int>() == kCheckpointFormatVersion,
            "checkpoint: unsupported format version");
    TemperatureSchedule sched;
    sched.beta_min = j.at("schedule").at("beta_min").get<double>();
    sched.delta = j.at("schedule").at("delta").get<double>();
    sched.delta_prime = j.at("schedule").at("delta_prime").get<double>();
    Network control = detail::net_from_json(j.at("networks").at("control"));
    Network fe = detail::net_from_json(j.at("networks").at("free_energy"));
    Network corr = detail::net_from_json(j.at("networks").at("path_correction"));
    Vec params(control.param_count() + fe.param_count() + corr.param_count());
    params.segment(0, control.param_count()) = decode_doubles(
        j.at("networks").at("control").at("params_b64").get<std::string>(), control.param_count());
    params.segment(control.param_count(), fe.param_count()) = decode_doubles(
        j.at("networks").at("free_energy").at("params_b64").get<std::string>(), fe.param_count());
    params.segment(control.param_count() + fe.param_count(), corr.param_count()) =
        decode_doubles(j.at("networks").at("path_correction").at("params_b64").get<std::string>(),
                       corr.param_count());
    ModelArch arch;
    arch.width = control.spec().hidden_width;
    arch.depth = control.spec().depth;
    Checkpoint out{Models::restore(j.at("dim").get<Index>(), j.at("source_variance").get<double>(),
                                   j.at("continuum").get<bool>(), sched, arch, std::move(control),
                                   std::move(fe), std::move(corr), std::move(params)),
                   j.at("manifest_hash").get<std::string>()};
    return out;
}

}  // namespace ctds

#endif  // CTDS_CHECKPOINT_HPP
