#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fndt1/config.hpp"
#include "fndt1/pipeline.hpp"
#include "fndt1/planner.hpp"

// The size-selection workflow: per FND size, measure the intrinsic relaxation
// rate of the bare suspension, add the Gd3+ solution, measure again, isolate
// the target rate and score the size by its SNR at tau = T1/2. Sizes whose
// control calibration is unreliable are flagged and skipped for titration.

namespace fndt1 {

struct CompareConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out/compare";
    int threads = 1;
    bool plot = false;
    std::vector<std::string> sizes;
    double fnd_concentration = default_fnd_concentration; // ug/ml
    int tau_points = 20;
    double tau_resolution = min_resolvable_tau;
    // titration step: stock added to the sample volume
    double sample_volume_ul = 170.0;
    double stock_volume_ul = 30.0;
    double stock_concentration_mm = 26.6;
    double coupling_constant = default_coupling_constant;
    PulseSchedule schedule; // tau_list is designed per size
    NoiseConfig noise;
    double polarization_time_constant = default_polarization_time_constant;
    AnalysisOptions analysis;

    json canonical;
    std::uint64_t config_hash = 0;

    double gd_concentration_after_mix() const {
        const double volumes[] = {sample_volume_ul, stock_volume_ul};
        const double concs[] = {0.0, stock_concentration_mm};
        return mix_solutions(volumes, concs);
    }
};

inline CompareConfig parse_compare_config(json doc, const ConfigOverrides& overrides = {}) {
    using namespace config_detail;
    reject_unknown(doc,
                   {"version", "seed", "out_dir", "threads", "plot", "compare", "schedule",
                    "noise", "instrument", "analysis"},
                   "(top level)");
    if (doc.contains("version") && doc.at("version").get<int>() != file_format_version)
        throw ValidationError("unsupported config version");
    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.out_dir) doc["out_dir"] = *overrides.out_dir;
    if (overrides.threads) doc["threads"] = *overrides.threads;

    CompareConfig cfg;
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("out_dir")) cfg.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("threads")) cfg.threads = doc.at("threads").get<int>();
    if (doc.contains("plot")) cfg.plot = doc.at("plot").get<bool>();

    if (!doc.contains("compare")) throw ValidationError("config needs a 'compare' section");
    const auto& c = doc.at("compare");
    reject_unknown(c,
                   {"sizes", "fnd_concentration", "tau_points", "tau_resolution",
                    "sample_volume", "stock_volume", "stock_concentration",
                    "coupling_constant"},
                   "compare");
    for (const auto& s : c.at("sizes")) {
        const auto name = s.get<std::string>();
        find_preset(name); // validates
        cfg.sizes.push_back(name);
    }
    if (cfg.sizes.size() < 2)
        throw ValidationError("compare needs at least 2 size presets");
    if (c.contains("fnd_concentration"))
        cfg.fnd_concentration =
            quantity(c, "fnd_concentration", units::Dimension::mass_concentration, "compare");
    if (c.contains("tau_points")) cfg.tau_points = c.at("tau_points").get<int>();
    if (c.contains("tau_resolution"))
        cfg.tau_resolution = quantity(c, "tau_resolution", units::Dimension::time, "compare");
    if (c.contains("sample_volume"))
        cfg.sample_volume_ul = quantity(c, "sample_volume", units::Dimension::volume, "compare");
    if (c.contains("stock_volume"))
        cfg.stock_volume_ul = quantity(c, "stock_volume", units::Dimension::volume, "compare");
    if (c.contains("stock_concentration"))
        cfg.stock_concentration_mm =
            quantity(c, "stock_concentration", units::Dimension::molar_concentration, "compare");
    if (c.contains("coupling_constant")) {
        const auto& v = c.at("coupling_constant");
        if (!v.is_string() || v.get<std::string>().find("nm^6/(s mM)") == std::string::npos)
            throw ValidationError(
                "'compare.coupling_constant' must be a string with unit nm^6/(s mM)");
        cfg.coupling_constant = std::stod(v.get<std::string>());
    }

    if (!doc.contains("schedule")) throw ValidationError("config needs a 'schedule' section");
    const auto& js = doc.at("schedule");
    reject_unknown(js, {"readout_len", "bin_width", "interleave", "stop"}, "schedule");
    if (js.contains("readout_len"))
        cfg.schedule.readout_len = quantity(js, "readout_len", units::Dimension::time, "schedule");
    if (js.contains("bin_width"))
        cfg.schedule.bin_width = quantity(js, "bin_width", units::Dimension::time, "schedule");
    if (js.contains("interleave")) cfg.schedule.interleave = js.at("interleave").get<bool>();
    cfg.schedule.stop = parse_stop_config(js.at("stop"));

    if (doc.contains("noise")) cfg.noise = parse_noise_config(doc.at("noise"));
    if (doc.contains("instrument")) {
        reject_unknown(doc.at("instrument"), {"polarization_time_constant"}, "instrument");
        if (doc.at("instrument").contains("polarization_time_constant"))
            cfg.polarization_time_constant =
                quantity(doc.at("instrument"), "polarization_time_constant",
                         units::Dimension::time, "instrument");
    }
    if (doc.contains("analysis")) cfg.analysis = parse_analysis_config(doc.at("analysis"));

    cfg.canonical = doc;
    const std::string dump = cfg.canonical.dump();
    cfg.config_hash = fnv1a64(dump.data(), dump.size());
    return cfg;
}

inline CompareConfig load_compare_config(const std::filesystem::path& path,
                                         const ConfigOverrides& overrides = {}) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ValidationError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_compare_config(std::move(doc), overrides);
}

struct CompareSizeRow {
    std::string preset;
    double diameter_nm = 0.0;
    double brightness_cps = 0.0; // suspension brightness of the preset
    double detected_rate_cps = 0.0;
    double contrast = 0.0, contrast_sigma = 0.0;
    double gamma_intrinsic = 0.0, gamma_intrinsic_sigma = 0.0;
    bool intrinsic_reliable = false;
    bool target_attempted = false;
    bool target_reliable = false;
    double gamma_target = 0.0, gamma_target_sigma = 0.0;
    bool below_control = false;
    double tau_eval = 0.0; // s, T1/2 of the measured decay
    double snr = 0.0, snr_sigma = 0.0;
    bool has_snr = false;  // blank where reliability fails
    int rank = 0;          // 1 = best SNR; 0 = unranked
    std::string notes;
};

struct SizeComparisonReport {
    std::vector<CompareSizeRow> rows;
    std::uint64_t config_hash = 0;
};

namespace compare_detail {

/// SNR at tau = T1/2 from the paired fits, with first-order error propagation.
inline void fill_snr(CompareSizeRow& row, const FitResult& intrinsic, const FitResult& measured,
                     double detected_rate, double readout_len, double target_time, int n_tau) {
    SnrInputs in;
    in.photon_rate = detected_rate;
    in.readout_len = readout_len;
    in.total_time = target_time / std::max(1, n_tau); // time attributable to one curve point
    in.contrast = std::max(0.0, intrinsic.params.contrast);
    in.gamma_intrinsic = intrinsic.params.rate;
    in.gamma_measured = std::max(measured.params.rate, intrinsic.params.rate);
    const double tau_eval = 0.5 / measured.params.rate;
    row.tau_eval = tau_eval;
    row.snr = snr(in, tau_eval);
    row.has_snr = true;

    const double dC = in.contrast > 0 ? row.snr / in.contrast : 0.0;
    const double dGi = -tau_eval * row.snr;
    const double em = std::exp(-in.gamma_measured * tau_eval);
    const double dGm = row.snr * tau_eval * em / std::max(1e-300, 1.0 - em);
    const double sC = intrinsic.param_sigmas[param_contrast];
    const double sGi = intrinsic.param_sigmas[param_rate];
    const double sGm = measured.param_sigmas[param_rate];
    row.snr_sigma = std::sqrt(dC * dC * sC * sC + dGi * dGi * sGi * sGi + dGm * dGm * sGm * sGm);
}

} // namespace compare_detail

/// Run the full per-size workflow and assemble the comparison report.
/// Per-size failures are recorded in their row; the sweep continues.
inline SizeComparisonReport compare_sizes(const CompareConfig& cfg) {
    SizeComparisonReport report;
    report.config_hash = cfg.config_hash;
    const double gd_mm = cfg.gd_concentration_after_mix();

    std::vector<ManifestEntry> entries;
    std::filesystem::create_directories(cfg.out_dir);
    entries.push_back(pipeline_detail::write_tracked(cfg.out_dir, "config.resolved.json",
                                                     cfg.canonical.dump(1) + "\n"));

    for (std::size_t idx = 0; idx < cfg.sizes.size(); ++idx) {
        const SizePreset& preset = find_preset(cfg.sizes[idx]);
        CompareSizeRow row;
        row.preset = preset.name;
        row.diameter_nm = preset.diameter_nm;
        row.brightness_cps = preset.total_brightness_cps;

        RunConfig run;
        run.seed = mix_seed(cfg.seed, 0x517eull + idx);
        run.out_dir = (std::filesystem::path(cfg.out_dir) / preset.name).string();
        run.threads = cfg.threads;
        run.plot = cfg.plot;
        run.noise = cfg.noise;
        run.polarization_time_constant = cfg.polarization_time_constant;
        run.analysis = cfg.analysis;
        run.schedule = cfg.schedule;
        run.canonical = cfg.canonical;
        run.config_hash = cfg.config_hash;

        try {
            run.ensemble = make_ensemble(preset, cfg.fnd_concentration, mix_seed(run.seed, 0xe5ull));
            run.schedule.tau_list = design_tau_grid(preset.gamma_intrinsic_median,
                                                    cfg.tau_points, cfg.tau_resolution);
            run.target.gd_concentration = gd_mm;
            run.target.coupling_constant = cfg.coupling_constant;

            const PipelineResult res = run_pipeline(run, /*skip_target_if_unreliable=*/true);
            row.detected_rate_cps = res.detected_rate;
            row.contrast = res.control_fit.params.contrast;
            row.contrast_sigma = res.control_fit.param_sigmas[param_contrast];
            row.gamma_intrinsic = res.control_fit.params.rate;
            row.gamma_intrinsic_sigma = res.control_fit.param_sigmas[param_rate];
            row.intrinsic_reliable = res.control_fit.reliable;
            row.target_attempted = res.target_attempted;
            if (!res.control_fit.notes.empty()) row.notes += res.control_fit.notes;
            if (!res.isolation_note.empty()) row.notes += res.isolation_note + "; ";

            if (res.target_fit) {
                row.target_reliable = res.target_fit->reliable;
                if (res.isolation) {
                    row.gamma_target = res.isolation->gamma_target;
                    row.gamma_target_sigma = res.isolation->sigma;
                    row.below_control = res.isolation->below_control;
                }
                if (res.control_fit.reliable && res.target_fit->reliable)
                    compare_detail::fill_snr(row, res.control_fit, *res.target_fit,
                                             res.target_detected_rate,
                                             run.schedule.readout_len, res.target_time,
                                             static_cast<int>(run.schedule.tau_list.size()));
            }
        } catch (const Error& e) {
            row.notes += std::string("failed: ") + e.what();
        }
        report.rows.push_back(std::move(row));
    }

    // ranking annotations over the rows that produced an SNR
    std::vector<std::size_t> ranked;
    for (std::size_t i = 0; i < report.rows.size(); ++i)
        if (report.rows[i].has_snr) ranked.push_back(i);
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        return report.rows[a].snr > report.rows[b].snr;
    });
    for (std::size_t r = 0; r < ranked.size(); ++r)
        report.rows[ranked[r]].rank = static_cast<int>(r) + 1;

    // report files
    std::ostringstream tsv;
    tsv << "# fndt1-size-comparison v" << file_format_version << "\n";
    tsv << "preset\tdiameter_nm\tbrightness_cps\tdetected_rate_cps\tcontrast\tcontrast_sigma\t"
           "gamma_intrinsic_per_s\tgamma_intrinsic_sigma_per_s\tintrinsic_reliable\t"
           "gamma_target_per_s\tgamma_target_sigma_per_s\tbelow_control\ttau_eval_s\tsnr\t"
           "snr_sigma\trank\tnotes\n";
    for (const auto& r : report.rows) {
        tsv << r.preset << '\t' << double_str(r.diameter_nm) << '\t'
            << double_str(r.brightness_cps) << '\t' << double_str(r.detected_rate_cps) << '\t'
            << double_str(r.contrast) << '\t' << double_str(r.contrast_sigma) << '\t'
            << double_str(r.gamma_intrinsic) << '\t' << double_str(r.gamma_intrinsic_sigma)
            << '\t' << (r.intrinsic_reliable ? 1 : 0) << '\t';
        if (r.target_attempted)
            tsv << double_str(r.gamma_target) << '\t' << double_str(r.gamma_target_sigma) << '\t'
                << (r.below_control ? 1 : 0) << '\t';
        else
            tsv << "-\t-\t-\t";
        if (r.has_snr)
            tsv << double_str(r.tau_eval) << '\t' << double_str(r.snr) << '\t'
                << double_str(r.snr_sigma) << '\t' << r.rank << '\t';
        else
            tsv << "-\t-\t-\t-\t";
        tsv << (r.notes.empty() ? "-" : r.notes) << "\n";
    }
    entries.push_back(pipeline_detail::write_tracked(cfg.out_dir, "report.tsv", tsv.str()));

    json jr;
    jr["format"] = "fndt1-size-comparison";
    jr["version"] = file_format_version;
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"preset", r.preset},
                 {"diameter_nm", r.diameter_nm},
                 {"brightness_cps", r.brightness_cps},
                 {"detected_rate_cps", r.detected_rate_cps},
                 {"contrast", r.contrast},
                 {"contrast_sigma", r.contrast_sigma},
                 {"gamma_intrinsic_per_s", r.gamma_intrinsic},
                 {"gamma_intrinsic_sigma_per_s", r.gamma_intrinsic_sigma},
                 {"intrinsic_reliable", r.intrinsic_reliable},
                 {"target_attempted", r.target_attempted},
                 {"notes", r.notes}};
        if (r.target_attempted) {
            row["gamma_target_per_s"] = r.gamma_target;
            row["gamma_target_sigma_per_s"] = r.gamma_target_sigma;
            row["below_control"] = r.below_control;
        }
        if (r.has_snr) {
            row["tau_eval_s"] = r.tau_eval;
            row["snr"] = r.snr;
            row["snr_sigma"] = r.snr_sigma;
            row["rank"] = r.rank;
        }
        rows.push_back(std::move(row));
    }
    jr["rows"] = std::move(rows);
    entries.push_back(
        pipeline_detail::write_tracked(cfg.out_dir, "report.json", jr.dump(1) + "\n"));

    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    write_manifest(cfg.out_dir, cfg.config_hash, cfg.seed, entries);
    return report;
}

} // namespace fndt1
