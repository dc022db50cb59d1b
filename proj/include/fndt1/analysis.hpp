#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fndt1/errors.hpp"
#include "fndt1/fit_types.hpp"
#include "fndt1/relax.hpp"
#include "fndt1/schedule.hpp"

// Trace reduction: the windowed-ratio normalization that turns binned pulses
// into T1 curve points, plus the noise audits built on repeated traces.

namespace fndt1 {

/// Integration windows of the common-mode-rejecting ratio: a signal window at
/// the start of the readout pulse (spin-state population) and a reference
/// window at its end (repolarized steady state).
struct WindowSpec {
    double signal_start = 0.0;  // s, from the pulse start
    double signal_len = 2e-6;   // s
    double reference_len = 10e-6; // s, measured back from the pulse end

    void validate(double readout_len, double bin_width) const {
        if (!(signal_len > 0.0) || !(reference_len > 0.0))
            throw ValidationError("window lengths must be > 0");
        if (!(signal_start >= 0.0)) throw ValidationError("signal window start must be >= 0");
        if (signal_start + signal_len > readout_len - reference_len + 1e-12)
            throw ValidationError("signal and reference windows must be disjoint and "
                                  "inside the readout pulse");
        auto aligned = [&](double t) {
            const double k = t / bin_width;
            return std::abs(k - std::llround(k)) < 1e-9 * std::max(1.0, k);
        };
        if (!aligned(signal_start) || !aligned(signal_len) || !aligned(reference_len))
            throw ValidationError("window edges must align with the bin grid");
    }
};

struct WindowRatio {
    double ratio = 0.0;
    double sigma = 0.0;
    std::int64_t photons_signal = 0;
    std::int64_t photons_reference = 0;
};

/// Width-normalized signal/reference ratio of one trace, with Poisson error
/// propagation inflated by the configured excess-noise factor.
inline WindowRatio window_ratio(const BinnedTrace& trace, const WindowSpec& windows,
                                double excess_noise_factor = 1.0) {
    const double readout_len = trace.readout_len();
    if (trace.counts.empty()) throw ValidationError("empty trace");
    windows.validate(readout_len, trace.bin_width);
    if (!(excess_noise_factor >= 1.0))
        throw ValidationError("excess_noise_factor must be >= 1");

    const auto bin_of = [&](double t) {
        return static_cast<std::size_t>(std::llround(t / trace.bin_width));
    };
    const std::size_t sig_lo = bin_of(windows.signal_start);
    const std::size_t sig_hi = bin_of(windows.signal_start + windows.signal_len);
    const std::size_t ref_lo = bin_of(readout_len - windows.reference_len);

    WindowRatio out;
    for (std::size_t b = sig_lo; b < sig_hi; ++b) out.photons_signal += trace.counts[b];
    for (std::size_t b = ref_lo; b < trace.counts.size(); ++b)
        out.photons_reference += trace.counts[b];
    if (out.photons_reference == 0)
        throw ValidationError("zero reference-window counts: cannot normalize");

    const double sig_rate = static_cast<double>(out.photons_signal) / windows.signal_len;
    const double ref_rate = static_cast<double>(out.photons_reference) / windows.reference_len;
    out.ratio = sig_rate / ref_rate;
    const double rel2 = 1.0 / std::max<double>(1, out.photons_signal) +
                        1.0 / static_cast<double>(out.photons_reference);
    out.sigma = std::max(out.ratio, 1e-12) * excess_noise_factor * std::sqrt(rel2);
    return out;
}

struct CurvePoint {
    double tau = 0.0;
    double ratio = 0.0;
    double sigma = 0.0;
    std::int64_t photons_signal = 0;
    std::int64_t photons_reference = 0;
    std::int64_t pulses = 0;
    int acquisition_order = 0;
};

/// One relaxation curve: the analysis/fit exchange format.
struct T1Curve {
    std::vector<CurvePoint> points;
    double excess_noise_factor = 1.0;
};

/// Reduce traces to one curve point per distinct tau. Traces sharing a tau
/// are pooled by summing counts and pulses before the ratio is formed.
inline T1Curve build_curve(std::span<const BinnedTrace> traces, const WindowSpec& windows,
                           double excess_noise_factor = 1.0) {
    if (traces.empty()) throw ValidationError("no traces to analyze");
    std::vector<double> order;
    std::map<double, BinnedTrace> pooled;
    for (const auto& tr : traces) {
        auto it = pooled.find(tr.tau);
        if (it == pooled.end()) {
            pooled.emplace(tr.tau, tr);
            order.push_back(tr.tau);
        } else {
            if (it->second.counts.size() != tr.counts.size() ||
                it->second.bin_width != tr.bin_width)
                throw ValidationError("traces at the same tau have mismatched bin grids");
            for (std::size_t b = 0; b < tr.counts.size(); ++b)
                it->second.counts[b] += tr.counts[b];
            it->second.pulses_accumulated += tr.pulses_accumulated;
        }
    }
    if (pooled.size() < 5)
        throw ValidationError("a T1 curve needs at least 5 distinct tau values, got " +
                              std::to_string(pooled.size()));

    T1Curve curve;
    curve.excess_noise_factor = excess_noise_factor;
    int idx = 0;
    for (double tau : order) {
        const auto& tr = pooled.at(tau);
        const auto wr = window_ratio(tr, windows, excess_noise_factor);
        CurvePoint p;
        p.tau = tau;
        p.ratio = wr.ratio;
        p.sigma = wr.sigma;
        p.photons_signal = wr.photons_signal;
        p.photons_reference = wr.photons_reference;
        p.pulses = tr.pulses_accumulated;
        p.acquisition_order = idx++;
        curve.points.push_back(p);
    }
    std::sort(curve.points.begin(), curve.points.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.tau < b.tau; });
    return curve;
}

struct NoiseAudit {
    double factor = 0.0; // sqrt(observed / Poisson-predicted ratio variance)
    std::size_t n_traces = 0;
    bool degenerate = false;
};

/// Compare the observed scatter of repeated window ratios at one tau with the
/// Poisson prediction. A shot-noise-limited instrument returns ~1.
inline NoiseAudit noise_audit(std::span<const BinnedTrace> traces, const WindowSpec& windows) {
    if (traces.size() < 20)
        throw ValidationError("noise audit needs >= 20 repeated traces at one tau, got " +
                              std::to_string(traces.size()));
    const double tau0 = traces.front().tau;
    for (const auto& tr : traces)
        if (tr.tau != tau0)
            throw ValidationError("noise audit expects repeated traces at a single tau");

    std::vector<double> ratios;
    double predicted = 0.0;
    for (const auto& tr : traces) {
        const auto wr = window_ratio(tr, windows, 1.0);
        ratios.push_back(wr.ratio);
        const double rel2 = 1.0 / static_cast<double>(std::max<std::int64_t>(1, wr.photons_signal)) +
                            1.0 / static_cast<double>(wr.photons_reference);
        predicted += wr.ratio * wr.ratio * rel2;
    }
    predicted /= static_cast<double>(ratios.size());

    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    double var = 0.0;
    for (double r : ratios) var += (r - mean) * (r - mean);
    var /= static_cast<double>(ratios.size() - 1);

    NoiseAudit audit;
    audit.n_traces = ratios.size();
    if (var <= 0.0 || predicted <= 0.0) {
        audit.degenerate = true;
        audit.factor = 0.0;
        return audit;
    }
    audit.factor = std::sqrt(var / predicted);
    return audit;
}

struct IsolatedTarget {
    double gamma_target = 0.0; // s^-1
    double sigma = 0.0;        // s^-1, quadrature of the two fit sigmas
    bool below_control = false;
};

/// Difference of the measured and control rate estimates with quadrature
/// error propagation; the two fits are treated as independent acquisitions.
inline IsolatedTarget isolate_target(const FitResult& fit_measured,
                                     const FitResult& fit_intrinsic, bool force = false) {
    if (!force && !(fit_measured.reliable && fit_intrinsic.reliable)) {
        std::string which;
        if (!fit_measured.reliable) which += " measured";
        if (!fit_intrinsic.reliable) which += " intrinsic";
        throw UnreliableResultError("cannot isolate the target rate from unreliable fits (" +
                                    which + " ); pass force to override");
    }
    const auto iso =
        isolate_target_rate(fit_measured.params.rate, fit_intrinsic.params.rate);
    IsolatedTarget out;
    out.gamma_target = iso.gamma_target;
    out.below_control = iso.below_control;
    const double sm = fit_measured.param_sigmas[param_rate];
    const double si = fit_intrinsic.param_sigmas[param_rate];
    out.sigma = std::sqrt(sm * sm + si * si);
    return out;
}

struct SnrEmpirical {
    double snr = 0.0;
    double mean_signal = 0.0;
    double std_signal = 0.0;
    std::size_t n_runs = 0;
    bool wide_interval_warning = false; // fewer than 10 independent runs
};

/// Empirical SNR at tau_eval: mean over independent runs of the fitted decay
/// amplitude at tau_eval, divided by its run-to-run standard deviation.
inline SnrEmpirical snr_empirical(std::span<const FitResult> fits, double tau_eval) {
    if (fits.size() < 2)
        throw ValidationError("snr_empirical needs at least 2 independent runs");
    if (!(tau_eval > 0.0)) throw ValidationError("tau_eval must be > 0");

    std::vector<double> values;
    for (const auto& f : fits) {
        values.push_back(decay_signal(f.params, tau_eval) - f.params.offset);
    }
    SnrEmpirical out;
    out.n_runs = values.size();
    out.wide_interval_warning = values.size() < 10;
    for (double v : values) out.mean_signal += v;
    out.mean_signal /= static_cast<double>(values.size());
    for (double v : values)
        out.std_signal += (v - out.mean_signal) * (v - out.mean_signal);
    out.std_signal = std::sqrt(out.std_signal / static_cast<double>(values.size() - 1));
    out.snr = out.std_signal > 0.0 ? out.mean_signal / out.std_signal : 0.0;
    return out;
}

} // namespace fndt1
