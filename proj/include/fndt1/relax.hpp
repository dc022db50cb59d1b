#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "fndt1/errors.hpp"

// Closed-form spin-relaxation physics: the stretched-exponential decay law,
// rate algebra, the shot-noise-limited SNR of a relaxation measurement, and
// laser repolarization dynamics. Everything here is pure and stateless.

namespace fndt1 {

/// Time constant of the saturating repolarization law, s. Chosen so that the
/// polarization level passes 98% within an 80 us illumination window.
inline constexpr double default_polarization_time_constant = 20e-6;

/// Largest measurable relaxation rate, s^-1: the reciprocal of the shortest
/// pulse-resolvable evolution time (5 us).
inline constexpr double default_gamma_max = 2e5;

/// Shortest schedulable evolution time, s.
inline constexpr double min_resolvable_tau = 5e-6;

/// Parameters of the fitted decay curve
///     ratio(tau) = contrast * exp(-(rate * tau)^stretch) + offset.
struct RelaxationParams {
    double contrast = 0.0; // dimensionless fraction
    double rate = 0.0;     // s^-1
    double stretch = 1.0;  // dimensionless, in (0, 2]
    double offset = 0.0;   // dimensionless

    /// T1 = 1/rate; +inf when the rate is zero.
    double t1() const {
        return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
    }

    void validate() const {
        if (!(rate >= 0.0)) throw ValidationError("relaxation rate must be >= 0");
        if (!(stretch > 0.0 && stretch <= 2.0))
            throw ValidationError("stretch factor must lie in (0, 2]");
        if (!(contrast >= -0.05 && contrast <= 0.5))
            throw ValidationError("contrast must lie in [-0.05, 0.5]");
        if (!(offset >= 0.0)) throw ValidationError("offset must be >= 0");
    }
};

/// Inputs of the shot-noise-limited SNR formula.
struct SnrInputs {
    double photon_rate = 0.0;     // counts/s
    double readout_len = 0.0;     // s
    double total_time = 0.0;      // s
    double contrast = 0.0;        // dimensionless
    double gamma_intrinsic = 0.0; // s^-1
    double gamma_measured = 0.0;  // s^-1

    void validate() const {
        if (!(photon_rate > 0.0)) throw ValidationError("photon_rate must be > 0");
        if (!(readout_len > 0.0)) throw ValidationError("readout_len must be > 0");
        if (!(total_time > 0.0)) throw ValidationError("total_time must be > 0");
        if (!(contrast >= 0.0)) throw ValidationError("contrast must be >= 0");
        if (!(gamma_intrinsic > 0.0)) throw ValidationError("gamma_intrinsic must be > 0");
        if (!(gamma_measured >= gamma_intrinsic))
            throw ValidationError("gamma_measured must be >= gamma_intrinsic");
    }
};

/// Stretched-exponential decay signal at evolution time tau.
inline double decay_signal(const RelaxationParams& q, double tau) {
    if (!(tau >= 0.0)) throw ValidationError("tau must be >= 0");
    const double u = q.rate * tau;
    return q.contrast * std::exp(-std::pow(u, q.stretch)) + q.offset;
}

/// Single-emitter emission intensity: pure exponential whose rate is the
/// intrinsic rate plus the sum of all target-induced rates. An empty target
/// list reduces to intrinsic-only decay.
inline double single_nv_intensity(double gamma_intrinsic, std::span<const double> target_rates,
                                  double contrast, double offset, double tau) {
    if (!(tau >= 0.0)) throw ValidationError("tau must be >= 0");
    if (!(gamma_intrinsic >= 0.0)) throw ValidationError("gamma_intrinsic must be >= 0");
    double gamma = gamma_intrinsic;
    for (double g : target_rates) {
        if (!(g >= 0.0)) throw ValidationError("target rates must be >= 0");
        gamma += g;
    }
    return contrast * std::exp(-gamma * tau) + offset;
}

/// Difference of measured and control rates. A negative value is reported
/// as-is with the below_control indicator set; it is never clamped, since
/// silent clamping would bias titration series near the detection limit.
struct IsolatedRate {
    double gamma_target = 0.0; // s^-1
    bool below_control = false;
};

inline IsolatedRate isolate_target_rate(double gamma_measured, double gamma_intrinsic) {
    if (!(gamma_measured >= 0.0) || !(gamma_intrinsic >= 0.0))
        throw ValidationError("rates must be >= 0");
    const double diff = gamma_measured - gamma_intrinsic;
    return IsolatedRate{diff, diff < 0.0};
}

/// Shot-noise-limited SNR of a relaxation measurement at evolution time tau:
///     sqrt(R * t_RO * T_tot / tau) * (3C/4) * exp(-G_int*tau) * (1 - exp(-G_meas*tau)).
/// Vanishes at tau -> 0+ and tau -> inf, with a unique interior maximum.
inline double snr(const SnrInputs& in, double tau) {
    if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
    const double photons = in.photon_rate * in.readout_len * in.total_time / tau;
    return std::sqrt(photons) * 0.75 * in.contrast * std::exp(-in.gamma_intrinsic * tau) *
           (1.0 - std::exp(-in.gamma_measured * tau));
}

/// Optical spin-polarization level after continuous illumination for
/// t_illuminated, relative to the thermal baseline: saturating approach to 1.
inline double polarization_level(double t_illuminated,
                                 double pol_time_constant = default_polarization_time_constant) {
    if (!(t_illuminated >= 0.0)) throw ValidationError("illumination time must be >= 0");
    if (!(pol_time_constant > 0.0)) throw ValidationError("polarization time constant must be > 0");
    return 1.0 - std::exp(-t_illuminated / pol_time_constant);
}

/// Usable operating band of the sensor, Gamma_max - Gamma_intrinsic. Rejects
/// a band that is empty from the start (sensor saturated).
inline double dynamic_range(double gamma_intrinsic, double gamma_max) {
    if (!(gamma_intrinsic >= 0.0)) throw ValidationError("gamma_intrinsic must be >= 0");
    if (!(gamma_max > gamma_intrinsic))
        throw ValidationError("gamma_max must exceed gamma_intrinsic (sensor saturated: " +
                              std::to_string(gamma_intrinsic) + " /s leaves no operating band)");
    return gamma_max - gamma_intrinsic;
}

} // namespace fndt1
