#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fndt1/errors.hpp"

namespace fndt1 {

/// When to stop accumulating pulses.
struct StopCondition {
    enum class Mode {
        fixed_repeats,     // value = pulses per tau
        wall_clock,        // value = instrument time budget, s
        reference_photons, // value = photon budget in the first tau's reference window
    };

    Mode mode = Mode::fixed_repeats;
    double value = 1;

    /// Hard cap on pulses per tau; a photon budget that cannot be reached
    /// (for instance at zero brightness) fails explicitly at this cap.
    std::int64_t max_pulses_per_tau = 50'000'000;

    static StopCondition fixed_repeats(std::int64_t n) {
        return {Mode::fixed_repeats, static_cast<double>(n), 50'000'000};
    }
    static StopCondition wall_clock(double seconds) {
        return {Mode::wall_clock, seconds, 50'000'000};
    }
    static StopCondition reference_photons(double photons) {
        return {Mode::reference_photons, photons, 50'000'000};
    }

    void validate() const {
        if (!(value > 0)) throw ValidationError("stop condition value must be > 0");
        if (max_pulses_per_tau < 1) throw ValidationError("pulse cap must be >= 1");
    }
};

/// Laser pulse protocol: equal-length readout pulses separated by the dark
/// evolution times in tau_list.
struct PulseSchedule {
    double readout_len = 80e-6; // s
    std::vector<double> tau_list; // s, strictly positive; first entry anchors photon budgets
    double bin_width = 0.5e-6;  // s
    bool interleave = true;     // cycle tau values round-robin
    StopCondition stop = StopCondition::fixed_repeats(1);

    int n_bins() const { return static_cast<int>(std::llround(readout_len / bin_width)); }

    void validate() const {
        if (!(readout_len > 0.0)) throw ValidationError("readout_len must be > 0");
        if (!(bin_width > 0.0)) throw ValidationError("bin_width must be > 0");
        const double ratio = readout_len / bin_width;
        if (std::abs(ratio - std::llround(ratio)) > 1e-9 * ratio || std::llround(ratio) < 1)
            throw ValidationError("bin_width must divide readout_len exactly");
        if (tau_list.empty()) throw ValidationError("tau_list must not be empty");
        for (double t : tau_list)
            if (!(t > 0.0)) throw ValidationError("all tau values must be > 0");
        stop.validate();
    }
};

/// Instrument response and noise model. Amplitudes are fractions; the excess
/// factor inflates count variance relative to Poisson (variance x factor^2).
struct NoiseConfig {
    double drift_amplitude = 0.025;     // bound of the slow multiplicative drift
    double drift_timescale = 10.0;      // s, diffusion time across the drift band
    double excess_noise_factor = 2.0;   // >= 1
    double detector_linear_limit = 2e6; // counts/s; brighter input is attenuated
    double dead_time = 25e-9;           // s, nonparalyzable
    bool spin_mixed_mode = false;       // strong-DC-field control: no spin signal

    void validate() const {
        if (!(drift_amplitude >= 0.0 && drift_amplitude <= 0.1))
            throw ValidationError("drift_amplitude must lie in [0, 0.1]");
        if (!(drift_timescale > 0.0)) throw ValidationError("drift_timescale must be > 0");
        if (!(excess_noise_factor >= 1.0))
            throw ValidationError("excess_noise_factor must be >= 1");
        if (!(detector_linear_limit > 0.0))
            throw ValidationError("detector_linear_limit must be > 0");
        if (!(dead_time >= 0.0)) throw ValidationError("dead_time must be >= 0");
    }
};

/// Time-binned photon counts accumulated over one or more readout pulses at
/// a single evolution time.
struct BinnedTrace {
    double tau = 0.0;       // s
    double bin_width = 0.0; // s
    std::vector<std::int64_t> counts;
    std::int64_t pulses_accumulated = 0;

    double readout_len() const { return bin_width * static_cast<double>(counts.size()); }

    std::int64_t total_counts() const {
        std::int64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
};

} // namespace fndt1
