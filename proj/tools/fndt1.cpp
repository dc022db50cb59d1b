// fndt1 command-line tool: simulate pulsed T1 relaxometry acquisitions on
// FND suspensions, reduce traces to curves, fit them, plan experiments and
// compare particle sizes. Every subcommand works on saved artifacts so the
// stages can be re-run independently.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fndt1/fndt1.hpp"

namespace {

using namespace fndt1;
namespace fs = std::filesystem;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> preset;
    std::optional<int> threads;
    std::string format = "table";
};

ConfigOverrides overrides_of(const CommonOpts& opts) {
    ConfigOverrides ov;
    ov.seed = opts.seed;
    ov.preset = opts.preset;
    ov.threads = opts.threads;
    // --out beats the environment override, which beats the config value
    if (opts.out_dir) {
        ov.out_dir = opts.out_dir;
    } else if (const char* env = std::getenv("FNDT1_OUT_DIR"); env && *env) {
        ov.out_dir = std::string(env);
    }
    return ov;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "run configuration file (JSON)");
    if (needs_config) c->required();
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out_dir, "override the output directory");
    cmd->add_option("--preset", opts.preset, "override the ensemble size preset");
    cmd->add_option("--threads", opts.threads, "worker threads for the simulation");
    cmd->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"table", "records"}));
}

int run_simulate(const CommonOpts& opts, bool control_only, std::int64_t chunk_pulses) {
    const RunConfig cfg = load_run_config(opts.config_path, overrides_of(opts));
    const SampledEnsemble ensemble = sample_ensemble(cfg.ensemble);
    const TargetSpec target = control_only ? TargetSpec{} : cfg.target;
    const std::uint64_t sim_seed = mix_seed(cfg.seed, control_only ? 0xc0ull : 0x7a6ull);

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
    archive.result = sim.run_until(cfg.schedule.stop, chunk_pulses);

    const fs::path out = fs::path(cfg.out_dir) /
                         (control_only ? "control.trace.json" : "traces.trace.json");
    write_trace_archive(out, archive);
    std::cout << "wrote " << out.string() << "\n"
              << "  pulses/tau " << archive.result.pulses_per_tau << ", simulated "
              << archive.result.simulated_time << " s, detected "
              << archive.result.detected_rate << " cps\n";
    return 0;
}

int run_analyze(const CommonOpts& opts, const std::string& traces_path) {
    WindowSpec windows;
    if (!opts.config_path.empty()) {
        const RunConfig cfg = load_run_config(opts.config_path, overrides_of(opts));
        windows = cfg.analysis.windows;
    }
    const TraceArchive archive = read_trace_archive(traces_path);
    const T1Curve curve =
        build_curve(archive.result.traces, windows, archive.noise.excess_noise_factor);

    fs::path out = fs::path(traces_path).parent_path();
    if (opts.out_dir) out = *opts.out_dir;
    else if (const char* env = std::getenv("FNDT1_OUT_DIR"); env && *env) out = env;
    fs::path stem = fs::path(traces_path).filename().replace_extension().replace_extension();
    const fs::path curve_path = out / (stem.string() + ".curve.tsv");
    write_curve_tsv(curve_path, curve);
    std::cout << "wrote " << curve_path.string() << " (" << curve.points.size()
              << " points)\n";
    return 0;
}

int run_fit(const CommonOpts& opts, const std::string& curve_path,
            std::optional<double> fix_p, int draws, bool plot, bool require_reliable) {
    const T1Curve curve = read_curve_tsv(curve_path);
    FitOptions fopt;
    fopt.fix_p = fix_p;
    fopt.bootstrap_draws = draws;
    if (opts.seed) fopt.seed = *opts.seed;
    const FitResult fit = fit_stretched(curve, fopt);

    fs::path out = fs::path(curve_path).parent_path();
    if (opts.out_dir) out = *opts.out_dir;
    else if (const char* env = std::getenv("FNDT1_OUT_DIR"); env && *env) out = env;
    fs::path stem = fs::path(curve_path).filename().replace_extension().replace_extension();
    const fs::path fit_path = out / (stem.string() + ".fit.json");
    write_fit_json(fit_path, fit);
    if (plot) write_curve_svg(out / (stem.string() + ".curve.svg"), curve, &fit);

    if (opts.format == "records") {
        std::cout << fit_to_json(fit).dump(1) << "\n";
    } else {
        std::cout << "fit " << curve_path << " -> " << fit_path.string() << "\n";
        std::printf("  contrast  %.5f +- %.5f\n", fit.params.contrast,
                    fit.param_sigmas[param_contrast]);
        std::printf("  rate      %.4g +- %.3g /s   (T1 = %.4g s)\n", fit.params.rate,
                    fit.param_sigmas[param_rate], 1.0 / fit.params.rate);
        std::printf("  stretch   %.4f +- %.4f\n", fit.params.stretch,
                    fit.param_sigmas[param_stretch]);
        std::printf("  offset    %.5f +- %.5f\n", fit.params.offset,
                    fit.param_sigmas[param_offset]);
        std::printf("  chi2/dof  %.3f, reliable: %s%s%s\n", fit.chi2_reduced,
                    fit.reliable ? "yes" : "no", fit.notes.empty() ? "" : " -- ",
                    fit.notes.c_str());
    }
    if (require_reliable && !fit.reliable)
        throw UnreliableResultError("fit flagged unreliable: " + fit.notes);
    return 0;
}

int run_plan(const CommonOpts& opts, std::optional<std::string> gamma_measured,
             std::optional<std::string> total_time, int grid_points) {
    SnrInputs in;
    in.readout_len = 80e-6;
    in.total_time = 3000.0;
    double gamma_max = default_gamma_max;

    if (!opts.config_path.empty()) {
        const auto doc = json::parse(read_text_file(opts.config_path));
        if (!doc.contains("plan"))
            throw ValidationError("config has no 'plan' section");
        const auto& p = doc.at("plan");
        config_detail::reject_unknown(p,
                                      {"photon_rate", "readout_len", "total_time", "contrast",
                                       "gamma_intrinsic", "gamma_measured", "gamma_max",
                                       "grid_points"},
                                      "plan");
        in.photon_rate =
            config_detail::quantity(p, "photon_rate", units::Dimension::count_rate, "plan");
        if (p.contains("readout_len"))
            in.readout_len =
                config_detail::quantity(p, "readout_len", units::Dimension::time, "plan");
        if (p.contains("total_time"))
            in.total_time =
                config_detail::quantity(p, "total_time", units::Dimension::time, "plan");
        in.contrast = p.at("contrast").get<double>();
        in.gamma_intrinsic =
            config_detail::quantity(p, "gamma_intrinsic", units::Dimension::rate, "plan");
        in.gamma_measured =
            p.contains("gamma_measured")
                ? config_detail::quantity(p, "gamma_measured", units::Dimension::rate, "plan")
                : in.gamma_intrinsic;
        if (p.contains("gamma_max"))
            gamma_max = config_detail::quantity(p, "gamma_max", units::Dimension::rate, "plan");
        if (p.contains("grid_points")) grid_points = p.at("grid_points").get<int>();
    } else if (opts.preset) {
        const SizePreset& preset = find_preset(*opts.preset);
        in.photon_rate = preset.total_brightness_cps;
        in.contrast = preset.contrast;
        in.gamma_intrinsic = preset.gamma_intrinsic_median;
        in.gamma_measured = preset.gamma_intrinsic_median;
    } else {
        throw ValidationError("plan needs --config with a 'plan' section or --preset");
    }
    if (gamma_measured)
        in.gamma_measured = units::parse_rate(*gamma_measured, "--gamma-measured");
    if (total_time) in.total_time = units::parse_time(*total_time, "--total-time");

    const double tau_star = optimal_tau(in);
    const double tau_half = 0.5 / in.gamma_measured;
    const auto grid = design_tau_grid(in.gamma_measured, grid_points);
    const double band = dynamic_range(in.gamma_intrinsic, gamma_max);

    if (opts.format == "records") {
        json j{{"tau_star_s", tau_star},
               {"snr_at_tau_star", snr(in, tau_star)},
               {"tau_t1_half_s", tau_half},
               {"snr_at_t1_half", snr(in, tau_half)},
               {"dynamic_range_per_s", band},
               {"tau_grid_s", grid}};
        std::cout << j.dump(1) << "\n";
    } else {
        std::printf("optimal tau        %.6g s (SNR %.4g)\n", tau_star, snr(in, tau_star));
        std::printf("tau = T1/2         %.6g s (SNR %.4g)\n", tau_half, snr(in, tau_half));
        std::printf("dynamic range      %.6g /s\n", band);
        std::printf("suggested tau grid (%zu points):", grid.size());
        for (double t : grid) std::printf(" %.4g", t);
        std::printf(" s\n");
    }
    return 0;
}

int run_compare(const CommonOpts& opts) {
    const CompareConfig cfg = load_compare_config(opts.config_path, overrides_of(opts));
    const SizeComparisonReport report = compare_sizes(cfg);

    if (opts.format == "records") {
        std::cout << read_text_file(fs::path(cfg.out_dir) / "report.json");
    } else {
        std::printf("%-11s %10s %9s %12s %12s %8s %5s\n", "preset", "bright", "contrast",
                    "G_intr(/s)", "G_targ(/s)", "SNR", "rank");
        for (const auto& r : report.rows) {
            std::printf("%-11s %10.3g %9.4f %12.4g", r.preset.c_str(), r.brightness_cps,
                        r.contrast, r.gamma_intrinsic);
            if (r.target_attempted) std::printf(" %12.4g", r.gamma_target);
            else std::printf(" %12s", "-");
            if (r.has_snr) std::printf(" %8.3g %5d", r.snr, r.rank);
            else std::printf(" %8s %5s", "-", "-");
            if (!r.intrinsic_reliable) std::printf("  [unreliable]");
            std::printf("\n");
        }
        std::printf("report: %s\n", (fs::path(cfg.out_dir) / "report.tsv").c_str());
    }
    return 0;
}

int run_audit(const CommonOpts& opts, const std::string& traces_path) {
    WindowSpec windows;
    if (!opts.config_path.empty()) {
        const RunConfig cfg = load_run_config(opts.config_path, overrides_of(opts));
        windows = cfg.analysis.windows;
    }
    const TraceArchive archive = read_trace_archive(traces_path);

    std::map<double, std::vector<BinnedTrace>> by_tau;
    for (const auto& tr : archive.result.traces) by_tau[tr.tau].push_back(tr);

    json rows = json::array();
    bool any = false;
    for (const auto& [tau, traces] : by_tau) {
        if (traces.size() < 20) continue;
        any = true;
        const auto audit = noise_audit(traces, windows);
        rows.push_back({{"tau_s", tau},
                        {"noise_factor", audit.factor},
                        {"n_traces", audit.n_traces},
                        {"degenerate", audit.degenerate}});
    }
    if (!any)
        throw ValidationError("no tau has >= 20 repeated traces; simulate with --chunk-pulses "
                              "to record repeats");
    if (opts.format == "records") {
        std::cout << json{{"audit", rows}}.dump(1) << "\n";
    } else {
        std::printf("%12s %14s %9s\n", "tau (s)", "noise factor", "traces");
        for (const auto& r : rows)
            std::printf("%12.4g %14.3f %9zu\n", r.at("tau_s").get<double>(),
                        r.at("noise_factor").get<double>(), r.at("n_traces").get<std::size_t>());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fndt1: in-solution T1 relaxometry simulator and analysis toolkit"};
    app.set_version_flag("--version", std::string("fndt1 ") + version_string);
    app.require_subcommand(1);

    CommonOpts opts;

    auto* simulate = app.add_subcommand("simulate", "run a pulsed acquisition");
    bool control_only = false;
    std::int64_t chunk_pulses = 0;
    add_common(simulate, opts);
    simulate->add_flag("--control", control_only, "zero the target (control acquisition)");
    simulate->add_option("--chunk-pulses", chunk_pulses,
                         "emit per-chunk traces of at most N pulses (for audits)");

    auto* analyze = app.add_subcommand("analyze", "reduce a trace archive to a T1 curve");
    std::string traces_path;
    add_common(analyze, opts, /*needs_config=*/false);
    analyze->add_option("--traces", traces_path, "trace archive (*.trace.json)")->required();

    auto* fit = app.add_subcommand("fit", "fit a stretched exponential to a curve");
    std::string curve_path;
    std::optional<double> fix_p;
    int draws = 200;
    bool plot = false, require_reliable = false;
    add_common(fit, opts, /*needs_config=*/false);
    fit->add_option("--curve", curve_path, "curve records (*.curve.tsv)")->required();
    fit->add_option("--fix-p", fix_p, "freeze the stretch factor");
    fit->add_option("--draws", draws, "bootstrap draws");
    fit->add_flag("--plot", plot, "write an SVG rendering of the curve and fit");
    fit->add_flag("--require-reliable", require_reliable,
                  "exit nonzero when the fit is flagged unreliable");

    auto* plan = app.add_subcommand("plan", "SNR planning: optimal tau, grids, dynamic range");
    std::optional<std::string> gamma_measured, total_time;
    int grid_points = 20;
    add_common(plan, opts, /*needs_config=*/false);
    plan->add_option("--gamma-measured", gamma_measured,
                     "expected measured rate, e.g. \"800 /s\"");
    plan->add_option("--total-time", total_time, "total acquisition time, e.g. \"3000 s\"");
    plan->add_option("--grid-points", grid_points, "tau grid size");

    auto* compare = app.add_subcommand("compare-sizes", "run the FND size comparison");
    add_common(compare, opts);

    auto* audit = app.add_subcommand("audit-noise",
                                     "compare repeated-trace scatter with shot noise");
    std::string audit_traces;
    add_common(audit, opts, /*needs_config=*/false);
    audit->add_option("--traces", audit_traces, "chunked trace archive")->required();

    try {
        app.parse(argc, argv);
        if (simulate->parsed()) return run_simulate(opts, control_only, chunk_pulses);
        if (analyze->parsed()) return run_analyze(opts, traces_path);
        if (fit->parsed())
            return run_fit(opts, curve_path, fix_p, draws, plot, require_reliable);
        if (plan->parsed()) return run_plan(opts, gamma_measured, total_time, grid_points);
        if (compare->parsed()) return run_compare(opts);
        if (audit->parsed()) return run_audit(opts, audit_traces);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(fndt1::ErrorClass::validation);
    } catch (const fndt1::FitNonConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n  " << e.diagnostics() << "\n";
        return e.exit_code();
    } catch (const fndt1::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
