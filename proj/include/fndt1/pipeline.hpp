#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fndt1/acquisition.hpp"
#include "fndt1/analysis.hpp"
#include "fndt1/config.hpp"
#include "fndt1/fit.hpp"
#include "fndt1/io.hpp"

// The simulate -> analyze -> fit -> report chain behind one configuration.
// A control (target-free) acquisition is always run; when the config carries
// an active target, a second acquisition on the same sampled suspension
// follows and the target rate is isolated from the two fits. All outputs are
// stamped with the config hash and seed; rerunning a config reproduces every
// byte.

namespace fndt1 {

struct PipelineResult {
    std::filesystem::path out_dir;
    std::uint64_t config_hash = 0;
    FitResult control_fit;
    std::optional<FitResult> target_fit;
    std::optional<IsolatedTarget> isolation;
    std::string isolation_note;
    bool target_attempted = false;
    double control_time = 0.0; // s of instrument time
    double target_time = 0.0;
    double detected_rate = 0.0;        // cps, control acquisition
    double target_detected_rate = 0.0; // cps, target acquisition
    std::vector<ManifestEntry> entries;
};

namespace pipeline_detail {

inline ManifestEntry write_tracked(const std::filesystem::path& dir, const std::string& name,
                                   const std::string& text) {
    write_text_file(dir / name, text);
    return ManifestEntry{name, text.size(), fnv64_hex(text)};
}

} // namespace pipeline_detail

/// Run one acquisition (simulate + analyze + fit) and write its artifacts
/// under `dir` with the given file prefix.
inline std::pair<FitResult, TraceArchive> run_acquisition(
    const RunConfig& cfg, const SampledEnsemble& ensemble, const TargetSpec& target,
    std::uint64_t sim_seed, const std::filesystem::path& dir, const std::string& prefix,
    std::vector<ManifestEntry>& entries) {
    using pipeline_detail::write_tracked;

    TraceSimulator sim(ensemble, cfg.schedule, cfg.noise, target, sim_seed,
                       cfg.polarization_time_constant, cfg.threads);
    TraceArchive archive;
    archive.seed = sim_seed;
    archive.schedule = cfg.schedule;
    archive.noise = cfg.noise;
    archive.target = target;
    archive.polarization_time_constant = cfg.polarization_time_constant;
    archive.ensemble_name = cfg.ensemble.name;
    archive.n_emitters = ensemble.emitters.size();
    archive.total_brightness = ensemble.total_brightness;
    archive.particle_count_in_beam = ensemble.particle_count_in_beam;
    archive.scattering = ensemble.scattering;
    archive.result = sim.run_until(cfg.schedule.stop);

    entries.push_back(write_tracked(dir, prefix + ".trace.json",
                                    trace_archive_to_json(archive).dump(1) + "\n"));

    const T1Curve curve =
        build_curve(archive.result.traces, cfg.analysis.windows, cfg.noise.excess_noise_factor);
    entries.push_back(write_tracked(dir, prefix + ".curve.tsv", curve_to_tsv(curve)));

    FitOptions fopt;
    fopt.fix_p = cfg.analysis.fix_p;
    fopt.bootstrap_draws = cfg.analysis.bootstrap_draws;
    fopt.seed = mix_seed(sim_seed, 0xf17ull);
    const FitResult fit = fit_stretched(curve, fopt);
    entries.push_back(write_tracked(dir, prefix + ".fit.json", fit_to_json(fit).dump(1) + "\n"));

    if (cfg.plot)
        entries.push_back(write_tracked(dir, prefix + ".curve.svg", curve_to_svg(curve, &fit)));

    return {fit, std::move(archive)};
}

/// Execute the full chain for one configuration.
///
/// skip_target_if_unreliable mirrors the bench workflow: when the control
/// calibration cannot be trusted there is no point titrating the target.
inline PipelineResult run_pipeline(const RunConfig& cfg, bool skip_target_if_unreliable = true,
                                   bool force_isolation = false) {
    PipelineResult out;
    out.out_dir = cfg.out_dir;
    out.config_hash = cfg.config_hash;
    std::filesystem::create_directories(out.out_dir);

    out.entries.push_back(pipeline_detail::write_tracked(out.out_dir, "config.resolved.json",
                                                         cfg.canonical.dump(1) + "\n"));

    const SampledEnsemble ensemble = sample_ensemble(cfg.ensemble);

    auto [control_fit, control_archive] =
        run_acquisition(cfg, ensemble, TargetSpec{}, mix_seed(cfg.seed, 0xc0ull), out.out_dir,
                        "control", out.entries);
    out.control_fit = control_fit;
    out.control_time = control_archive.result.simulated_time;
    out.detected_rate = control_archive.result.detected_rate;

    if (cfg.target.active()) {
        if (!control_fit.reliable && skip_target_if_unreliable) {
            out.isolation_note = "control fit unreliable; target run not attempted";
        } else {
            out.target_attempted = true;
            auto [target_fit, target_archive] =
                run_acquisition(cfg, ensemble, cfg.target, mix_seed(cfg.seed, 0x7a6ull),
                                out.out_dir, "target", out.entries);
            out.target_fit = target_fit;
            out.target_time = target_archive.result.simulated_time;
            out.target_detected_rate = target_archive.result.detected_rate;
            try {
                out.isolation = isolate_target(target_fit, control_fit, force_isolation);
            } catch (const UnreliableResultError& e) {
                out.isolation_note = e.what();
            }
        }
    }

    json report;
    report["format"] = "fndt1-report";
    report["version"] = file_format_version;
    report["ensemble"] = cfg.ensemble.name;
    report["control"] = {{"rate_per_s", out.control_fit.params.rate},
                         {"rate_sigma_per_s", out.control_fit.param_sigmas[param_rate]},
                         {"contrast", out.control_fit.params.contrast},
                         {"stretch", out.control_fit.params.stretch},
                         {"reliable", out.control_fit.reliable},
                         {"acquisition_time_s", out.control_time}};
    if (out.target_fit) {
        report["target"] = {{"rate_per_s", out.target_fit->params.rate},
                            {"rate_sigma_per_s", out.target_fit->param_sigmas[param_rate]},
                            {"contrast", out.target_fit->params.contrast},
                            {"stretch", out.target_fit->params.stretch},
                            {"reliable", out.target_fit->reliable},
                            {"acquisition_time_s", out.target_time}};
    }
    if (out.isolation) {
        report["isolation"] = {{"gamma_target_per_s", out.isolation->gamma_target},
                               {"sigma_per_s", out.isolation->sigma},
                               {"below_control", out.isolation->below_control}};
    } else if (!out.isolation_note.empty()) {
        report["isolation_note"] = out.isolation_note;
    }
    out.entries.push_back(
        pipeline_detail::write_tracked(out.out_dir, "report.json", report.dump(1) + "\n"));

    std::sort(out.entries.begin(), out.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    write_manifest(out.out_dir, cfg.config_hash, cfg.seed, out.entries);
    return out;
}

} // namespace fndt1
