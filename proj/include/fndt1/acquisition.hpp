#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <vector>

#include "fndt1/ensemble.hpp"
#include "fndt1/errors.hpp"
#include "fndt1/relax.hpp"
#include "fndt1/rng.hpp"
#include "fndt1/schedule.hpp"

// Pulse-protocol execution against a sampled ensemble. Within a readout pulse
// the expected rate of bin b at evolution time tau is
//
//   r_b(tau) = attenuation * [A + B(tau) * env_b],
//   A       = sum of emitter brightness,
//   B(tau)  = sum of brightness * contrast * pol_end * exp(-Gamma_total * tau),
//   env_b   = bin average of exp(-t/T_pol)  (laser repolarization erases the
//             spin signal towards the end of the pulse),
//
// modulated per pulse by a slow multiplicative drift accrued during the dark
// evolution times and compressed by nonparalyzable detector dead time. Counts
// are Poisson, optionally inflated to a configured excess-noise factor.
//
// Pulses are accumulated in rounds; every (tau, round) block consumes its own
// pre-split random substream, so traces are bit-identical for any thread
// count. Sums of per-pulse dead-time-compressed rates are evaluated through
// the drift moments S1 = sum(m_k), S2 = sum(m_k^2) with a second-order
// expansion in the drift; the residual error is below 1e-7 relative for the
// permitted drift band.

namespace fndt1 {

/// Nonparalyzable detector response: r / (1 + r * t_dead), bounded by 1/t_dead.
inline double apply_dead_time(double true_rate, double dead_time) {
    if (!(true_rate >= 0.0)) throw ValidationError("rate must be >= 0");
    if (!(dead_time >= 0.0)) throw ValidationError("dead time must be >= 0");
    return true_rate / (1.0 + true_rate * dead_time);
}

struct SimulationResult {
    std::vector<BinnedTrace> traces; // tau-major; one per (tau, chunk)
    double attenuation = 1.0;        // ND-style factor keeping the detector linear
    double detected_rate = 0.0;      // counts/s at steady state, after dead time
    double simulated_time = 0.0;     // s of instrument time
    std::int64_t total_pulses = 0;
    std::int64_t pulses_per_tau = 0;
    std::int64_t reference_photons_first_tau = 0;
};

class TraceSimulator {
public:
    TraceSimulator(const SampledEnsemble& ensemble, const PulseSchedule& schedule,
                   const NoiseConfig& noise, const TargetSpec& target, std::uint64_t seed,
                   double pol_time_constant = default_polarization_time_constant,
                   int threads = 1)
        : schedule_(schedule), noise_(noise), seed_(seed),
          threads_(std::max(1, threads)), drift_rng_(seed, 0xd21f7ull) {
        schedule_.validate();
        noise_.validate();
        target.validate();
        if (!(pol_time_constant > 0.0))
            throw ValidationError("polarization time constant must be > 0");
        if (ensemble.emitters.empty())
            throw ValidationError("cannot simulate an empty ensemble");

        n_tau_ = schedule_.tau_list.size();
        n_bins_ = static_cast<std::size_t>(schedule_.n_bins());

        // bin-averaged repolarization envelope
        env_.resize(n_bins_);
        const double T = pol_time_constant;
        for (std::size_t b = 0; b < n_bins_; ++b) {
            const double t0 = static_cast<double>(b) * schedule_.bin_width;
            const double t1 = t0 + schedule_.bin_width;
            env_[b] = T / schedule_.bin_width * (std::exp(-t0 / T) - std::exp(-t1 / T));
        }

        const double pol_end = polarization_level(schedule_.readout_len, pol_time_constant);
        flat_rate_ = 0.0;
        spin_amp_.assign(n_tau_, 0.0);
        for (const auto& e : ensemble.emitters) {
            flat_rate_ += e.brightness;
            if (noise_.spin_mixed_mode) continue;
            const double gamma_total = e.gamma_intrinsic + target_rate_for_emitter(e, target);
            const double weight = e.brightness * e.contrast * pol_end;
            for (std::size_t i = 0; i < n_tau_; ++i)
                spin_amp_[i] += weight * std::exp(-gamma_total * schedule_.tau_list[i]);
        }

        double peak = flat_rate_;
        for (double b : spin_amp_) peak = std::max(peak, flat_rate_ + b * env_.front());
        peak *= 1.0 + noise_.drift_amplitude;
        attenuation_ = peak > noise_.detector_linear_limit && peak > 0.0
                           ? noise_.detector_linear_limit / peak
                           : 1.0;
        detected_rate_ = apply_dead_time(attenuation_ * flat_rate_, noise_.dead_time);

        cycle_time_ = 0.0;
        for (double t : schedule_.tau_list) cycle_time_ += t + schedule_.readout_len;
    }

    /// Expected reference-window photons per pulse at the first tau (drift-free).
    double expected_reference_photons_per_pulse(double reference_window_len = 10e-6) const {
        const auto first_ref_bin = ref_start_bin(reference_window_len);
        double mu = 0.0;
        for (std::size_t b = first_ref_bin; b < n_bins_; ++b)
            mu += apply_dead_time(attenuation_ * (flat_rate_ + spin_amp_[0] * env_[b]),
                                  noise_.dead_time) *
                  schedule_.bin_width;
        return mu;
    }

    /// Accumulate pulses until the stop condition is met. With chunk_pulses = 0
    /// one trace per tau is produced; otherwise traces are emitted in chunks of
    /// at most chunk_pulses pulses each (for drift diagnostics and noise audits).
    SimulationResult run_until(const StopCondition& stop, std::int64_t chunk_pulses = 0,
                               double reference_window_len = 10e-6) {
        stop.validate();
        if (!(reference_window_len > 0.0) ||
            ref_start_bin(reference_window_len) >= n_bins_)
            throw ValidationError("reference window must fit inside the readout pulse");

        std::int64_t target_pulses = -1; // resolved up front except for photon budgets
        switch (stop.mode) {
            case StopCondition::Mode::fixed_repeats:
                target_pulses = static_cast<std::int64_t>(stop.value);
                break;
            case StopCondition::Mode::wall_clock:
                target_pulses = std::max<std::int64_t>(
                    1, static_cast<std::int64_t>(stop.value / cycle_time_));
                break;
            case StopCondition::Mode::reference_photons: {
                if (expected_reference_photons_per_pulse(reference_window_len) <= 0.0)
                    throw SimulationError(
                        "reference-photon stop condition unreachable: zero expected rate");
                break;
            }
        }
        if (target_pulses >= 0)
            target_pulses = std::min(target_pulses, stop.max_pulses_per_tau);

        std::vector<std::vector<BinnedTrace>> per_tau(n_tau_);
        std::int64_t pulses_done = 0;
        std::int64_t ref_photons = 0;
        int round = 0;

        while (true) {
            std::int64_t round_pulses = 0;
            if (target_pulses >= 0) {
                round_pulses = target_pulses - pulses_done;
            } else {
                const double mu = expected_reference_photons_per_pulse(reference_window_len);
                const double remaining = stop.value - static_cast<double>(ref_photons);
                if (remaining <= 0.0) break;
                round_pulses = static_cast<std::int64_t>(std::ceil(remaining / mu)) + 1;
                round_pulses = std::min(round_pulses, stop.max_pulses_per_tau - pulses_done);
                if (round_pulses <= 0)
                    throw SimulationError(
                        "reference-photon budget not reached within the pulse cap (" +
                        std::to_string(stop.max_pulses_per_tau) + " pulses per tau)");
            }
            if (round_pulses <= 0) break;
            if (chunk_pulses > 0) round_pulses = std::min(round_pulses, chunk_pulses);

            const auto blocks = simulate_round(round, round_pulses);
            for (std::size_t i = 0; i < n_tau_; ++i) {
                if (chunk_pulses > 0 || per_tau[i].empty()) {
                    per_tau[i].push_back(blocks[i]);
                } else {
                    auto& acc = per_tau[i].front();
                    for (std::size_t b = 0; b < n_bins_; ++b) acc.counts[b] += blocks[i].counts[b];
                    acc.pulses_accumulated += blocks[i].pulses_accumulated;
                }
            }
            pulses_done += round_pulses;
            ++round;

            ref_photons = 0;
            {
                const auto first_ref_bin = ref_start_bin(reference_window_len);
                for (const auto& tr : per_tau[0])
                    for (std::size_t b = first_ref_bin; b < n_bins_; ++b)
                        ref_photons += tr.counts[b];
            }
            if (target_pulses >= 0 && pulses_done >= target_pulses) break;
            if (stop.mode == StopCondition::Mode::reference_photons &&
                static_cast<double>(ref_photons) >= stop.value)
                break;
        }

        SimulationResult result;
        result.attenuation = attenuation_;
        result.detected_rate = detected_rate_;
        result.pulses_per_tau = pulses_done;
        result.total_pulses = pulses_done * static_cast<std::int64_t>(n_tau_);
        result.simulated_time = static_cast<double>(pulses_done) * cycle_time_;
        result.reference_photons_first_tau = ref_photons;
        for (auto& chunks : per_tau)
            for (auto& tr : chunks) result.traces.push_back(std::move(tr));
        return result;
    }

    double flat_rate() const { return flat_rate_; }
    double attenuation() const { return attenuation_; }
    double detected_rate() const { return detected_rate_; }
    double cycle_time() const { return cycle_time_; }

private:
    std::size_t ref_start_bin(double reference_window_len) const {
        return n_bins_ - static_cast<std::size_t>(
                             std::llround(reference_window_len / schedule_.bin_width));
    }

    /// One round of n pulses per tau. The drift walk advances serially over the
    /// global pulse order; count sampling is independent per tau.
    std::vector<BinnedTrace> simulate_round(int round, std::int64_t n) {
        const auto n_tau = n_tau_;
        std::vector<double> s1(n_tau, 0.0), s2(n_tau, 0.0);

        // drift accrues during dark evolution; one step per pulse, reflected
        // into [-A, +A]
        const double amp = noise_.drift_amplitude;
        auto step = [&](std::size_t i) {
            if (amp <= 0.0) return;
            const double sigma =
                amp * std::sqrt(2.0 * schedule_.tau_list[i] / noise_.drift_timescale);
            drift_ += sigma * drift_rng_.normal();
            while (drift_ > amp || drift_ < -amp) {
                if (drift_ > amp) drift_ = 2.0 * amp - drift_;
                if (drift_ < -amp) drift_ = -2.0 * amp - drift_;
            }
        };
        if (schedule_.interleave) {
            for (std::int64_t k = 0; k < n; ++k)
                for (std::size_t i = 0; i < n_tau; ++i) {
                    step(i);
                    const double m = 1.0 + drift_;
                    s1[i] += m;
                    s2[i] += m * m;
                }
        } else {
            for (std::size_t i = 0; i < n_tau; ++i)
                for (std::int64_t k = 0; k < n; ++k) {
                    step(i);
                    const double m = 1.0 + drift_;
                    s1[i] += m;
                    s2[i] += m * m;
                }
        }

        std::vector<BinnedTrace> out(n_tau);
        auto sample_tau = [&](std::size_t i) {
            BinnedTrace tr;
            tr.tau = schedule_.tau_list[i];
            tr.bin_width = schedule_.bin_width;
            tr.pulses_accumulated = n;
            tr.counts.resize(n_bins_);
            RandomStream rng(seed_, 0xacc5ull, static_cast<std::uint64_t>(round), i);
            const double nd = static_cast<double>(n);
            const double mean_m = s1[i] / nd;
            const double m2 = std::max(0.0, s2[i] - s1[i] * s1[i] / nd);
            const double f = noise_.excess_noise_factor;
            const double inflate = f > 1.0 ? std::sqrt(f * f - 1.0) : 0.0;
            const double td = noise_.dead_time;
            for (std::size_t b = 0; b < n_bins_; ++b) {
                const double base = attenuation_ * (flat_rate_ + spin_amp_[i] * env_[b]);
                const double r = base * mean_m;
                const double compressed = r / (1.0 + r * td);
                const double curvature = -2.0 * td / std::pow(1.0 + r * td, 3);
                const double mu =
                    schedule_.bin_width *
                    std::max(0.0, nd * compressed + 0.5 * curvature * base * base * m2);
                std::int64_t c = rng.poisson(mu);
                if (inflate > 0.0 && mu > 0.0)
                    c += std::llround(inflate * std::sqrt(mu) * rng.normal());
                tr.counts[b] = std::max<std::int64_t>(0, c);
            }
            out[i] = std::move(tr);
        };

        if (threads_ > 1 && n_tau > 1) {
            std::vector<std::future<void>> jobs;
            std::size_t next = 0;
            const std::size_t stride =
                (n_tau + static_cast<std::size_t>(threads_) - 1) / static_cast<std::size_t>(threads_);
            while (next < n_tau) {
                const std::size_t lo = next;
                const std::size_t hi = std::min(n_tau, lo + stride);
                next = hi;
                jobs.push_back(std::async(std::launch::async, [&, lo, hi] {
                    for (std::size_t i = lo; i < hi; ++i) sample_tau(i);
                }));
            }
            for (auto& j : jobs) j.get();
        } else {
            for (std::size_t i = 0; i < n_tau; ++i) sample_tau(i);
        }
        return out;
    }

    PulseSchedule schedule_;
    NoiseConfig noise_;
    std::uint64_t seed_;
    int threads_;
    RandomStream drift_rng_;
    double drift_ = 0.0;

    std::size_t n_tau_ = 0;
    std::size_t n_bins_ = 0;
    std::vector<double> env_;
    std::vector<double> spin_amp_; // B(tau), counts/s
    double flat_rate_ = 0.0;       // A, counts/s
    double attenuation_ = 1.0;
    double detected_rate_ = 0.0;
    double cycle_time_ = 0.0;
};

/// Convenience wrapper: build the simulator and run its stop condition.
inline SimulationResult simulate_traces(
    const SampledEnsemble& ensemble, const PulseSchedule& schedule, const NoiseConfig& noise,
    const TargetSpec& target, std::uint64_t seed,
    double pol_time_constant = default_polarization_time_constant, int threads = 1,
    std::int64_t chunk_pulses = 0) {
    TraceSimulator sim(ensemble, schedule, noise, target, seed, pol_time_constant, threads);
    return sim.run_until(schedule.stop, chunk_pulses);
}

} // namespace fndt1
