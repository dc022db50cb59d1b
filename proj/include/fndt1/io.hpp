#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fndt1/acquisition.hpp"
#include "fndt1/analysis.hpp"
#include "fndt1/ensemble.hpp"
#include "fndt1/errors.hpp"
#include "fndt1/fit_types.hpp"
#include "fndt1/rng.hpp"
#include "fndt1/schedule.hpp"
#include "fndt1/version.hpp"

// On-disk artifact formats, all versioned and deterministic byte-for-byte:
//   *.trace.json  self-describing trace archive (schedule, noise, seed, counts)
//   *.curve.tsv   one record per tau point
//   *.fit.json    fit parameters, sigmas, intervals, flags
//   manifest.json run manifest with the config hash and artifact digests

namespace fndt1 {

using json = nlohmann::json;

inline std::string double_str(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw ValidationError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string fnv64_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

// ---------------------------------------------------------------------------
// trace archive

/// Everything needed to re-analyze a simulated acquisition.
struct TraceArchive {
    std::uint64_t seed = 0;
    PulseSchedule schedule;
    NoiseConfig noise;
    TargetSpec target;
    double polarization_time_constant = default_polarization_time_constant;
    // ensemble summary (the emitter list itself is reproducible from the seed)
    std::string ensemble_name;
    std::size_t n_emitters = 0;
    double total_brightness = 0.0;
    double particle_count_in_beam = 0.0;
    ScatteringFactors scattering{};
    SimulationResult result;
};

inline json to_json(const StopCondition& stop) {
    const char* mode = stop.mode == StopCondition::Mode::fixed_repeats ? "fixed_repeats"
                       : stop.mode == StopCondition::Mode::wall_clock  ? "wall_clock"
                                                                       : "reference_photons";
    return json{{"mode", mode}, {"value", stop.value},
                {"max_pulses_per_tau", stop.max_pulses_per_tau}};
}

inline StopCondition stop_from_json(const json& j) {
    StopCondition stop;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "fixed_repeats") stop.mode = StopCondition::Mode::fixed_repeats;
    else if (mode == "wall_clock") stop.mode = StopCondition::Mode::wall_clock;
    else if (mode == "reference_photons") stop.mode = StopCondition::Mode::reference_photons;
    else throw ValidationError("unknown stop mode '" + mode + "'");
    stop.value = j.at("value").get<double>();
    if (j.contains("max_pulses_per_tau"))
        stop.max_pulses_per_tau = j.at("max_pulses_per_tau").get<std::int64_t>();
    return stop;
}

inline json trace_archive_to_json(const TraceArchive& a) {
    json j;
    j["format"] = "fndt1-trace";
    j["version"] = file_format_version;
    j["seed"] = a.seed;
    j["schedule"] = {{"readout_len_s", a.schedule.readout_len},
                     {"bin_width_s", a.schedule.bin_width},
                     {"interleave", a.schedule.interleave},
                     {"tau_list_s", a.schedule.tau_list},
                     {"stop", to_json(a.schedule.stop)}};
    j["noise"] = {{"drift_amplitude", a.noise.drift_amplitude},
                  {"drift_timescale_s", a.noise.drift_timescale},
                  {"excess_noise_factor", a.noise.excess_noise_factor},
                  {"detector_linear_limit_cps", a.noise.detector_linear_limit},
                  {"dead_time_s", a.noise.dead_time},
                  {"spin_mixed_mode", a.noise.spin_mixed_mode}};
    j["instrument"] = {{"polarization_time_constant_s", a.polarization_time_constant}};
    j["target"] = {{"gd_concentration_mM", a.target.gd_concentration},
                   {"coupling_constant_nm6_per_s_mM", a.target.coupling_constant},
                   {"softening_depth_nm", a.target.softening_depth},
                   {"uniform_rate_per_s", a.target.uniform_rate}};
    j["ensemble"] = {{"name", a.ensemble_name},
                     {"n_emitters", a.n_emitters},
                     {"total_brightness_cps", a.total_brightness},
                     {"particle_count_in_beam", a.particle_count_in_beam},
                     {"scattering_intensity_factor", a.scattering.intensity},
                     {"scattering_contrast_factor", a.scattering.contrast}};
    j["result"] = {{"attenuation", a.result.attenuation},
                   {"detected_rate_cps", a.result.detected_rate},
                   {"simulated_time_s", a.result.simulated_time},
                   {"total_pulses", a.result.total_pulses},
                   {"pulses_per_tau", a.result.pulses_per_tau},
                   {"reference_photons_first_tau", a.result.reference_photons_first_tau}};
    json traces = json::array();
    for (const auto& tr : a.result.traces) {
        traces.push_back({{"tau_s", tr.tau},
                          {"bin_width_s", tr.bin_width},
                          {"pulses", tr.pulses_accumulated},
                          {"counts", tr.counts}});
    }
    j["traces"] = std::move(traces);
    return j;
}

inline TraceArchive trace_archive_from_json(const json& j) {
    if (!j.contains("format") || j.at("format") != "fndt1-trace")
        throw ValidationError("not a fndt1 trace archive");
    if (j.at("version").get<int>() != file_format_version)
        throw ValidationError("unsupported trace archive version");
    TraceArchive a;
    a.seed = j.at("seed").get<std::uint64_t>();
    const auto& js = j.at("schedule");
    a.schedule.readout_len = js.at("readout_len_s").get<double>();
    a.schedule.bin_width = js.at("bin_width_s").get<double>();
    a.schedule.interleave = js.at("interleave").get<bool>();
    a.schedule.tau_list = js.at("tau_list_s").get<std::vector<double>>();
    a.schedule.stop = stop_from_json(js.at("stop"));
    const auto& jn = j.at("noise");
    a.noise.drift_amplitude = jn.at("drift_amplitude").get<double>();
    a.noise.drift_timescale = jn.at("drift_timescale_s").get<double>();
    a.noise.excess_noise_factor = jn.at("excess_noise_factor").get<double>();
    a.noise.detector_linear_limit = jn.at("detector_linear_limit_cps").get<double>();
    a.noise.dead_time = jn.at("dead_time_s").get<double>();
    a.noise.spin_mixed_mode = jn.at("spin_mixed_mode").get<bool>();
    a.polarization_time_constant =
        j.at("instrument").at("polarization_time_constant_s").get<double>();
    const auto& jt = j.at("target");
    a.target.gd_concentration = jt.at("gd_concentration_mM").get<double>();
    a.target.coupling_constant = jt.at("coupling_constant_nm6_per_s_mM").get<double>();
    a.target.softening_depth = jt.at("softening_depth_nm").get<double>();
    a.target.uniform_rate = jt.at("uniform_rate_per_s").get<double>();
    const auto& je = j.at("ensemble");
    a.ensemble_name = je.at("name").get<std::string>();
    a.n_emitters = je.at("n_emitters").get<std::size_t>();
    a.total_brightness = je.at("total_brightness_cps").get<double>();
    a.particle_count_in_beam = je.at("particle_count_in_beam").get<double>();
    a.scattering.intensity = je.at("scattering_intensity_factor").get<double>();
    a.scattering.contrast = je.at("scattering_contrast_factor").get<double>();
    const auto& jr = j.at("result");
    a.result.attenuation = jr.at("attenuation").get<double>();
    a.result.detected_rate = jr.at("detected_rate_cps").get<double>();
    a.result.simulated_time = jr.at("simulated_time_s").get<double>();
    a.result.total_pulses = jr.at("total_pulses").get<std::int64_t>();
    a.result.pulses_per_tau = jr.at("pulses_per_tau").get<std::int64_t>();
    a.result.reference_photons_first_tau =
        jr.at("reference_photons_first_tau").get<std::int64_t>();
    for (const auto& tj : j.at("traces")) {
        BinnedTrace tr;
        tr.tau = tj.at("tau_s").get<double>();
        tr.bin_width = tj.at("bin_width_s").get<double>();
        tr.pulses_accumulated = tj.at("pulses").get<std::int64_t>();
        tr.counts = tj.at("counts").get<std::vector<std::int64_t>>();
        a.result.traces.push_back(std::move(tr));
    }
    return a;
}

inline void write_trace_archive(const std::filesystem::path& path, const TraceArchive& a) {
    write_text_file(path, trace_archive_to_json(a).dump(1) + "\n");
}

inline TraceArchive read_trace_archive(const std::filesystem::path& path) {
    return trace_archive_from_json(json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// curve records

inline std::string curve_to_tsv(const T1Curve& curve) {
    std::ostringstream out;
    out << "# fndt1-curve v" << file_format_version << "\n";
    out << "# excess_noise_factor\t" << double_str(curve.excess_noise_factor) << "\n";
    out << "tau_s\tratio\tratio_sigma\tphotons_signal\tphotons_reference\tpulses\t"
           "acquisition_order\n";
    for (const auto& p : curve.points) {
        out << double_str(p.tau) << '\t' << double_str(p.ratio) << '\t' << double_str(p.sigma)
            << '\t' << p.photons_signal << '\t' << p.photons_reference << '\t' << p.pulses
            << '\t' << p.acquisition_order << "\n";
    }
    return out.str();
}

inline T1Curve curve_from_tsv(const std::string& text) {
    T1Curve curve;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (line.rfind("# excess_noise_factor\t", 0) == 0)
                curve.excess_noise_factor = std::stod(line.substr(line.find('\t') + 1));
            continue;
        }
        if (!header_seen) { // column header
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        CurvePoint p;
        row >> p.tau >> p.ratio >> p.sigma >> p.photons_signal >> p.photons_reference >>
            p.pulses >> p.acquisition_order;
        if (row.fail()) throw ValidationError("malformed curve record: " + line);
        curve.points.push_back(p);
    }
    if (curve.points.empty()) throw ValidationError("curve file holds no points");
    return curve;
}

inline void write_curve_tsv(const std::filesystem::path& path, const T1Curve& curve) {
    write_text_file(path, curve_to_tsv(curve));
}

inline T1Curve read_curve_tsv(const std::filesystem::path& path) {
    return curve_from_tsv(read_text_file(path));
}

// ---------------------------------------------------------------------------
// fit records

inline json fit_to_json(const FitResult& fit) {
    json j;
    j["format"] = "fndt1-fit";
    j["version"] = file_format_version;
    j["params"] = {{"contrast", fit.params.contrast},
                   {"rate_per_s", fit.params.rate},
                   {"stretch", fit.params.stretch},
                   {"offset", fit.params.offset}};
    j["t1_s"] = fit.params.rate > 0 ? json(1.0 / fit.params.rate) : json();
    json sig, intervals;
    for (int a = 0; a < 4; ++a) {
        sig[param_names[a]] = fit.param_sigmas[a];
        intervals[param_names[a]] = {{"lo", fit.bootstrap_intervals[a].lo},
                                     {"hi", fit.bootstrap_intervals[a].hi}};
    }
    j["param_sigmas"] = std::move(sig);
    j["bootstrap_intervals_68"] = std::move(intervals);
    json cov = json::array();
    for (int a = 0; a < 4; ++a) {
        json row = json::array();
        for (int b = 0; b < 4; ++b) row.push_back(fit.covariance[a][b]);
        cov.push_back(std::move(row));
    }
    j["covariance"] = std::move(cov);
    j["chi2_reduced"] = fit.chi2_reduced;
    j["weighted_ssr"] = fit.weighted_ssr;
    j["iterations"] = fit.iterations;
    j["bootstrap_draws_used"] = fit.bootstrap_draws_used;
    j["converged"] = fit.converged;
    j["reliable"] = fit.reliable;
    j["notes"] = fit.notes;
    return j;
}

inline FitResult fit_from_json(const json& j) {
    if (!j.contains("format") || j.at("format") != "fndt1-fit")
        throw ValidationError("not a fndt1 fit record");
    FitResult fit;
    const auto& p = j.at("params");
    fit.params.contrast = p.at("contrast").get<double>();
    fit.params.rate = p.at("rate_per_s").get<double>();
    fit.params.stretch = p.at("stretch").get<double>();
    fit.params.offset = p.at("offset").get<double>();
    for (int a = 0; a < 4; ++a) {
        fit.param_sigmas[a] = j.at("param_sigmas").at(param_names[a]).get<double>();
        fit.bootstrap_intervals[a].lo =
            j.at("bootstrap_intervals_68").at(param_names[a]).at("lo").get<double>();
        fit.bootstrap_intervals[a].hi =
            j.at("bootstrap_intervals_68").at(param_names[a]).at("hi").get<double>();
        for (int b = 0; b < 4; ++b)
            fit.covariance[a][b] = j.at("covariance").at(a).at(b).get<double>();
    }
    fit.chi2_reduced = j.at("chi2_reduced").get<double>();
    fit.weighted_ssr = j.at("weighted_ssr").get<double>();
    fit.iterations = j.at("iterations").get<int>();
    fit.bootstrap_draws_used = j.at("bootstrap_draws_used").get<int>();
    fit.converged = j.at("converged").get<bool>();
    fit.reliable = j.at("reliable").get<bool>();
    fit.notes = j.at("notes").get<std::string>();
    return fit;
}

inline void write_fit_json(const std::filesystem::path& path, const FitResult& fit) {
    write_text_file(path, fit_to_json(fit).dump(1) + "\n");
}

inline FitResult read_fit_json(const std::filesystem::path& path) {
    return fit_from_json(json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// run manifest

struct ManifestEntry {
    std::string path; // relative to the manifest
    std::size_t bytes = 0;
    std::string fnv64;
};

inline void write_manifest(const std::filesystem::path& dir, std::uint64_t config_hash,
                           std::uint64_t seed, const std::vector<ManifestEntry>& entries) {
    json j;
    j["format"] = "fndt1-manifest";
    j["version"] = file_format_version;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
    j["config_hash"] = hash;
    j["seed"] = seed;
    json artifacts = json::array();
    for (const auto& e : entries)
        artifacts.push_back({{"path", e.path}, {"bytes", e.bytes}, {"fnv64", e.fnv64}});
    j["artifacts"] = std::move(artifacts);
    write_text_file(dir / "manifest.json", j.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// static curve plot (SVG)

/// Minimal static rendering of a T1 curve with error bars and, optionally,
/// the fitted decay. Display only.
inline std::string curve_to_svg(const T1Curve& curve, const FitResult* fit = nullptr) {
    const double width = 640, height = 420, ml = 70, mr = 20, mt = 20, mb = 50;
    double t_lo = curve.points.front().tau, t_hi = t_lo;
    double y_lo = 1e300, y_hi = -1e300;
    for (const auto& p : curve.points) {
        t_lo = std::min(t_lo, p.tau);
        t_hi = std::max(t_hi, p.tau);
        y_lo = std::min(y_lo, p.ratio - 2 * p.sigma);
        y_hi = std::max(y_hi, p.ratio + 2 * p.sigma);
    }
    const double pad = 0.05 * (y_hi - y_lo + 1e-12);
    y_lo -= pad;
    y_hi += pad;
    auto xm = [&](double tau) {
        return ml + (std::log(tau) - std::log(t_lo)) / (std::log(t_hi) - std::log(t_lo)) *
                        (width - ml - mr);
    };
    auto ym = [&](double v) { return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb); };

    std::ostringstream s;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    s << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
      << height - mb << "' stroke='black'/>\n";
    s << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
      << "' stroke='black'/>\n";
    s << "<text x='" << (width / 2) << "' y='" << height - 12
      << "' text-anchor='middle' font-size='13'>evolution time tau (s, log)</text>\n";
    s << "<text x='16' y='" << (height / 2)
      << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 " << (height / 2)
      << ")'>signal/reference ratio</text>\n";
    if (fit) {
        s << "<path fill='none' stroke='#c33' stroke-width='1.5' d='";
        const int n = 200;
        for (int i = 0; i <= n; ++i) {
            const double tau = t_lo * std::pow(t_hi / t_lo, static_cast<double>(i) / n);
            const double v = decay_signal(fit->params, tau);
            s << (i == 0 ? 'M' : 'L') << xm(tau) << ' ' << ym(v) << ' ';
        }
        s << "'/>\n";
    }
    for (const auto& p : curve.points) {
        s << "<line x1='" << xm(p.tau) << "' y1='" << ym(p.ratio - p.sigma) << "' x2='"
          << xm(p.tau) << "' y2='" << ym(p.ratio + p.sigma) << "' stroke='#369'/>\n";
        s << "<circle cx='" << xm(p.tau) << "' cy='" << ym(p.ratio) << "' r='3' fill='#369'/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

inline void write_curve_svg(const std::filesystem::path& path, const T1Curve& curve,
                            const FitResult* fit = nullptr) {
    write_text_file(path, curve_to_svg(curve, fit));
}

} // namespace fndt1
