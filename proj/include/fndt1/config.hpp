#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fndt1/analysis.hpp"
#include "fndt1/ensemble.hpp"
#include "fndt1/errors.hpp"
#include "fndt1/fit.hpp"
#include "fndt1/io.hpp"
#include "fndt1/planner.hpp"
#include "fndt1/presets.hpp"
#include "fndt1/schedule.hpp"
#include "fndt1/units.hpp"

// Run configuration: one human-editable JSON document with explicit units on
// every physical quantity. Unknown keys are rejected, units are mandatory,
// and the whole document is validated before anything runs.

namespace fndt1 {

struct AnalysisOptions {
    WindowSpec windows;
    std::optional<double> fix_p;
    int bootstrap_draws = 200;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 1;
    bool plot = false;
    EnsembleSpec ensemble;
    TargetSpec target; // inactive when no target section is given
    PulseSchedule schedule;
    NoiseConfig noise;
    double polarization_time_constant = default_polarization_time_constant;
    AnalysisOptions analysis;

    json canonical;              // fully resolved document
    std::uint64_t config_hash = 0; // FNV-1a64 of the canonical dump
};

namespace config_detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const std::string& section) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok)
            throw ValidationError("unknown key '" + key + "' in config section '" + section +
                                  "'");
    }
}

inline double quantity(const json& j, const char* key, units::Dimension dim,
                       const std::string& section) {
    const auto& v = j.at(key);
    if (!v.is_string())
        throw ValidationError("'" + section + "." + key +
                              "' must be a string with an explicit unit");
    return units::parse_quantity(v.get<std::string>(), dim, section + "." + std::string(key));
}

} // namespace config_detail

inline EnsembleSpec parse_ensemble_config(const json& j, std::uint64_t seed) {
    using namespace config_detail;
    reject_unknown(j,
                   {"preset", "fnd_concentration", "particle_diameter", "diameter_cv",
                    "nv_per_particle_mean", "gamma_intrinsic_median", "gamma_intrinsic_logsigma",
                    "brightness_per_particle", "base_contrast", "beam_volume",
                    "max_sampled_emitters", "surface_weighted_depths"},
                   "ensemble");

    EnsembleSpec spec;
    const double conc = j.contains("fnd_concentration")
                            ? quantity(j, "fnd_concentration",
                                       units::Dimension::mass_concentration, "ensemble")
                            : default_fnd_concentration;
    if (j.contains("preset")) {
        spec = make_ensemble(j.at("preset").get<std::string>(), conc, seed);
    } else {
        spec.fnd_concentration = conc;
        spec.seed = seed;
        if (j.contains("particle_diameter"))
            spec.particle_diameter =
                quantity(j, "particle_diameter", units::Dimension::length, "ensemble");
        if (j.contains("nv_per_particle_mean"))
            spec.nv_per_particle_mean = j.at("nv_per_particle_mean").get<double>();
        if (j.contains("gamma_intrinsic_median"))
            spec.gamma_intrinsic_median =
                quantity(j, "gamma_intrinsic_median", units::Dimension::rate, "ensemble");
        if (j.contains("brightness_per_particle"))
            spec.brightness_per_particle = quantity(j, "brightness_per_particle",
                                                    units::Dimension::count_rate, "ensemble");
    }
    // optional overrides on top of a preset
    if (j.contains("diameter_cv")) spec.diameter_cv = j.at("diameter_cv").get<double>();
    if (j.contains("gamma_intrinsic_logsigma"))
        spec.gamma_intrinsic_logsigma = j.at("gamma_intrinsic_logsigma").get<double>();
    if (j.contains("base_contrast")) spec.base_contrast = j.at("base_contrast").get<double>();
    if (j.contains("beam_volume"))
        spec.beam_volume_ml =
            quantity(j, "beam_volume", units::Dimension::volume, "ensemble") / 1e3;
    if (j.contains("max_sampled_emitters"))
        spec.max_sampled_emitters = j.at("max_sampled_emitters").get<int>();
    if (j.contains("surface_weighted_depths"))
        spec.surface_weighted_depths = j.at("surface_weighted_depths").get<bool>();
    spec.validate();
    return spec;
}

inline TargetSpec parse_target_config(const json& j) {
    using namespace config_detail;
    reject_unknown(j, {"gd_concentration", "coupling_constant", "softening_depth",
                       "uniform_rate", "mix"},
                   "target");
    TargetSpec target;
    target.coupling_constant = default_coupling_constant;
    if (j.contains("mix")) {
        // dilution arithmetic: volumes and stock concentrations of pooled solutions
        const auto& m = j.at("mix");
        reject_unknown(m, {"volumes", "concentrations"}, "target.mix");
        std::vector<double> vols, concs;
        for (const auto& v : m.at("volumes"))
            vols.push_back(units::parse_volume(v.get<std::string>(), "target.mix.volumes"));
        for (const auto& c : m.at("concentrations"))
            concs.push_back(units::parse_molar(c.get<std::string>(), "target.mix.concentrations"));
        target.gd_concentration = mix_solutions(vols, concs);
    }
    if (j.contains("gd_concentration"))
        target.gd_concentration =
            quantity(j, "gd_concentration", units::Dimension::molar_concentration, "target");
    if (j.contains("coupling_constant")) {
        const auto& v = j.at("coupling_constant");
        if (!v.is_string() || v.get<std::string>().find("nm^6/(s mM)") == std::string::npos)
            throw ValidationError(
                "'target.coupling_constant' must be a string with unit nm^6/(s mM)");
        target.coupling_constant = std::stod(v.get<std::string>());
    }
    if (j.contains("softening_depth"))
        target.softening_depth =
            quantity(j, "softening_depth", units::Dimension::length, "target");
    if (j.contains("uniform_rate"))
        target.uniform_rate = quantity(j, "uniform_rate", units::Dimension::rate, "target");
    target.validate();
    return target;
}

inline StopCondition parse_stop_config(const json& j) {
    using namespace config_detail;
    reject_unknown(j, {"mode", "repeats", "budget", "photons", "max_pulses_per_tau"},
                   "schedule.stop");
    const std::string mode = j.at("mode").get<std::string>();
    StopCondition stop;
    if (mode == "fixed_repeats") {
        stop = StopCondition::fixed_repeats(j.at("repeats").get<std::int64_t>());
    } else if (mode == "wall_clock") {
        stop = StopCondition::wall_clock(quantity(j, "budget", units::Dimension::time,
                                                  "schedule.stop"));
    } else if (mode == "reference_photons") {
        stop = StopCondition::reference_photons(j.at("photons").get<double>());
    } else {
        throw ValidationError("unknown stop mode '" + mode +
                              "' (fixed_repeats | wall_clock | reference_photons)");
    }
    if (j.contains("max_pulses_per_tau"))
        stop.max_pulses_per_tau = j.at("max_pulses_per_tau").get<std::int64_t>();
    stop.validate();
    return stop;
}

inline PulseSchedule parse_schedule_config(const json& j) {
    using namespace config_detail;
    reject_unknown(j, {"readout_len", "bin_width", "interleave", "tau_list", "tau_grid", "stop"},
                   "schedule");
    PulseSchedule schedule;
    if (j.contains("readout_len"))
        schedule.readout_len = quantity(j, "readout_len", units::Dimension::time, "schedule");
    if (j.contains("bin_width"))
        schedule.bin_width = quantity(j, "bin_width", units::Dimension::time, "schedule");
    if (j.contains("interleave")) schedule.interleave = j.at("interleave").get<bool>();

    if (j.contains("tau_list") == j.contains("tau_grid"))
        throw ValidationError("schedule needs exactly one of 'tau_list' or 'tau_grid'");
    if (j.contains("tau_list")) {
        for (const auto& t : j.at("tau_list"))
            schedule.tau_list.push_back(
                units::parse_time(t.get<std::string>(), "schedule.tau_list"));
    } else {
        const auto& g = j.at("tau_grid");
        reject_unknown(g, {"gamma_guess", "points", "resolution"}, "schedule.tau_grid");
        const double gamma =
            quantity(g, "gamma_guess", units::Dimension::rate, "schedule.tau_grid");
        const int points = g.at("points").get<int>();
        const double resolution =
            g.contains("resolution")
                ? quantity(g, "resolution", units::Dimension::time, "schedule.tau_grid")
                : min_resolvable_tau;
        schedule.tau_list = design_tau_grid(gamma, points, resolution);
    }
    schedule.stop = parse_stop_config(j.at("stop"));
    schedule.validate();
    return schedule;
}

inline NoiseConfig parse_noise_config(const json& j) {
    using namespace config_detail;
    reject_unknown(j,
                   {"drift_amplitude", "drift_timescale", "excess_noise_factor",
                    "detector_linear_limit", "dead_time", "spin_mixed"},
                   "noise");
    NoiseConfig noise;
    if (j.contains("drift_amplitude")) noise.drift_amplitude = j.at("drift_amplitude").get<double>();
    if (j.contains("drift_timescale"))
        noise.drift_timescale = quantity(j, "drift_timescale", units::Dimension::time, "noise");
    if (j.contains("excess_noise_factor"))
        noise.excess_noise_factor = j.at("excess_noise_factor").get<double>();
    if (j.contains("detector_linear_limit"))
        noise.detector_linear_limit =
            quantity(j, "detector_linear_limit", units::Dimension::count_rate, "noise");
    if (j.contains("dead_time"))
        noise.dead_time = quantity(j, "dead_time", units::Dimension::time, "noise");
    if (j.contains("spin_mixed")) noise.spin_mixed_mode = j.at("spin_mixed").get<bool>();
    noise.validate();
    return noise;
}

inline AnalysisOptions parse_analysis_config(const json& j) {
    using namespace config_detail;
    reject_unknown(j, {"signal_window", "reference_window", "fix_p", "bootstrap_draws"},
                   "analysis");
    AnalysisOptions opts;
    if (j.contains("signal_window"))
        opts.windows.signal_len = quantity(j, "signal_window", units::Dimension::time, "analysis");
    if (j.contains("reference_window"))
        opts.windows.reference_len =
            quantity(j, "reference_window", units::Dimension::time, "analysis");
    if (j.contains("fix_p") && !j.at("fix_p").is_null())
        opts.fix_p = j.at("fix_p").get<double>();
    if (j.contains("bootstrap_draws")) opts.bootstrap_draws = j.at("bootstrap_draws").get<int>();
    if (opts.bootstrap_draws < 0) throw ValidationError("bootstrap_draws must be >= 0");
    return opts;
}

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> preset;
    std::optional<int> threads;
};

/// Parse and validate one run configuration document.
inline RunConfig parse_run_config(json doc, const ConfigOverrides& overrides = {}) {
    using namespace config_detail;
    reject_unknown(doc,
                   {"version", "seed", "out_dir", "threads", "plot", "ensemble", "target",
                    "schedule", "instrument", "noise", "analysis"},
                   "(top level)");
    if (doc.contains("version") && doc.at("version").get<int>() != file_format_version)
        throw ValidationError("unsupported config version");

    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.out_dir) doc["out_dir"] = *overrides.out_dir;
    if (overrides.threads) doc["threads"] = *overrides.threads;
    if (overrides.preset) doc["ensemble"]["preset"] = *overrides.preset;

    RunConfig cfg;
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("out_dir")) cfg.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("threads")) cfg.threads = doc.at("threads").get<int>();
    if (doc.contains("plot")) cfg.plot = doc.at("plot").get<bool>();
    if (cfg.threads < 1) throw ValidationError("threads must be >= 1");

    if (!doc.contains("ensemble")) throw ValidationError("config needs an 'ensemble' section");
    cfg.ensemble = parse_ensemble_config(doc.at("ensemble"), cfg.seed);
    if (doc.contains("target")) cfg.target = parse_target_config(doc.at("target"));
    if (!doc.contains("schedule")) throw ValidationError("config needs a 'schedule' section");
    cfg.schedule = parse_schedule_config(doc.at("schedule"));
    if (doc.contains("noise")) cfg.noise = parse_noise_config(doc.at("noise"));
    if (doc.contains("instrument")) {
        reject_unknown(doc.at("instrument"), {"polarization_time_constant"}, "instrument");
        if (doc.at("instrument").contains("polarization_time_constant"))
            cfg.polarization_time_constant = quantity(
                doc.at("instrument"), "polarization_time_constant", units::Dimension::time,
                "instrument");
    }
    if (doc.contains("analysis")) cfg.analysis = parse_analysis_config(doc.at("analysis"));
    cfg.analysis.windows.validate(cfg.schedule.readout_len, cfg.schedule.bin_width);

    // canonical resolved document: what actually runs, hashed for manifests.
    // out_dir and threads are dropped: neither changes a single output byte.
    json canon = doc;
    canon["seed"] = cfg.seed;
    canon.erase("out_dir");
    canon.erase("threads");
    json sched;
    sched["readout_len_s"] = cfg.schedule.readout_len;
    sched["bin_width_s"] = cfg.schedule.bin_width;
    sched["interleave"] = cfg.schedule.interleave;
    sched["tau_list_s"] = cfg.schedule.tau_list;
    sched["stop"] = to_json(cfg.schedule.stop);
    canon["schedule"] = std::move(sched);
    canon["resolved_ensemble"] = {{"name", cfg.ensemble.name},
                                  {"particle_diameter_nm", cfg.ensemble.particle_diameter},
                                  {"nv_per_particle_mean", cfg.ensemble.nv_per_particle_mean},
                                  {"gamma_intrinsic_median_per_s",
                                   cfg.ensemble.gamma_intrinsic_median},
                                  {"gamma_intrinsic_logsigma",
                                   cfg.ensemble.gamma_intrinsic_logsigma},
                                  {"brightness_per_particle_cps",
                                   cfg.ensemble.brightness_per_particle},
                                  {"base_contrast", cfg.ensemble.base_contrast},
                                  {"fnd_concentration_ugml", cfg.ensemble.fnd_concentration}};
    cfg.canonical = std::move(canon);
    const std::string dump = cfg.canonical.dump();
    cfg.config_hash = fnv1a64(dump.data(), dump.size());
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path,
                                 const ConfigOverrides& overrides = {}) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ValidationError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_run_config(std::move(doc), overrides);
}

} // namespace fndt1
