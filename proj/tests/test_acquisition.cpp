#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fndt1/acquisition.hpp"
#include "fndt1/analysis.hpp"

using namespace fndt1;

namespace {

/// Hand-built homogeneous ensemble: total brightness split over n emitters,
/// every emitter with the same rate and contrast.
SampledEnsemble uniform_ensemble(double total_brightness, double gamma, double contrast,
                                 int n = 16) {
    SampledEnsemble ens;
    for (int i = 0; i < n; ++i) {
        NVEmitter e;
        e.gamma_intrinsic = gamma;
        e.depth = 10.0;
        e.brightness = total_brightness / n;
        e.contrast = contrast;
        ens.emitters.push_back(e);
    }
    ens.total_brightness = total_brightness;
    ens.particle_count_in_beam = n;
    return ens;
}

PulseSchedule quiet_schedule(std::vector<double> taus, StopCondition stop) {
    PulseSchedule s;
    s.tau_list = std::move(taus);
    s.stop = stop;
    return s;
}

NoiseConfig quiet_noise() {
    NoiseConfig n;
    n.drift_amplitude = 0.0;
    n.excess_noise_factor = 1.0;
    n.dead_time = 0.0;
    n.detector_linear_limit = 1e18;
    return n;
}

double env_mean(double t0, double t1, double T) {
    return T / (t1 - t0) * (std::exp(-t0 / T) - std::exp(-t1 / T));
}

} // namespace

TEST_CASE("apply_dead_time: nonparalyzable response") {
    CHECK(apply_dead_time(0.0, 25e-9) == 0.0);
    CHECK(apply_dead_time(4e7, 25e-9) == Catch::Approx(2e7).epsilon(1e-12)); // r*t = 1
    CHECK(apply_dead_time(2e6, 25e-9) == Catch::Approx(1904761.9047619048).epsilon(1e-12));
    const double compression = 1.0 - apply_dead_time(2e6, 25e-9) / 2e6;
    CHECK(compression == Catch::Approx(0.047619047619047616).epsilon(1e-12));
}

TEST_CASE("apply_dead_time is linear within 1% below 0.01/t_dead and bounded") {
    const double td = 25e-9;
    for (double r = 1e3; r <= 0.01 / td; r *= 3.0)
        CHECK(apply_dead_time(r, td) == Catch::Approx(r).epsilon(0.01));
    double prev = -1.0;
    for (double r = 1e3; r < 1e14; r *= 10.0) {
        const double out = apply_dead_time(r, td);
        CHECK(out > prev);
        CHECK(out <= 1.0 / td);
        prev = out;
    }
}

TEST_CASE("traces are bit-identical across runs and thread counts") {
    const auto ens = uniform_ensemble(1e6, 200.0, 0.1);
    const auto sched = quiet_schedule({1e-3, 2e-3, 4e-3, 8e-3, 16e-3},
                                      StopCondition::fixed_repeats(200));
    NoiseConfig noise; // default: drift, excess noise, dead time all on

    const auto a = simulate_traces(ens, sched, noise, {}, 77, 20e-6, 1);
    const auto b = simulate_traces(ens, sched, noise, {}, 77, 20e-6, 1);
    const auto c = simulate_traces(ens, sched, noise, {}, 77, 20e-6, 2);
    REQUIRE(a.traces.size() == 5);
    for (std::size_t i = 0; i < a.traces.size(); ++i) {
        CHECK(a.traces[i].counts == b.traces[i].counts);
        CHECK(a.traces[i].counts == c.traces[i].counts);
    }

    const auto d = simulate_traces(ens, sched, noise, {}, 78, 20e-6, 1);
    bool differs = false;
    for (std::size_t i = 0; i < a.traces.size(); ++i)
        differs = differs || a.traces[i].counts != d.traces[i].counts;
    CHECK(differs);
}

TEST_CASE("fixed repeats of one give one pulse per tau") {
    const auto ens = uniform_ensemble(1e6, 200.0, 0.1);
    const auto sched =
        quiet_schedule({1e-3, 2e-3, 3e-3, 4e-3, 5e-3}, StopCondition::fixed_repeats(1));
    const auto res = simulate_traces(ens, sched, quiet_noise(), {}, 5);
    REQUIRE(res.traces.size() == 5);
    for (const auto& tr : res.traces) CHECK(tr.pulses_accumulated == 1);
    CHECK(res.pulses_per_tau == 1);
    CHECK(res.total_pulses == 5);
}

TEST_CASE("zero-contrast, drift-free source gives window ratio 1 within shot noise") {
    const auto ens = uniform_ensemble(2e6, 200.0, 0.0);
    const auto sched = quiet_schedule({1e-3, 2e-3, 4e-3, 8e-3, 16e-3},
                                      StopCondition::fixed_repeats(4000));
    const auto res = simulate_traces(ens, sched, quiet_noise(), {}, 21);
    WindowSpec windows;
    for (const auto& tr : res.traces) {
        const auto wr = window_ratio(tr, windows);
        CHECK(wr.ratio == Catch::Approx(1.0).margin(4.0 * wr.sigma));
    }
}

TEST_CASE("spin-mixed mode removes the spin signal") {
    const auto ens = uniform_ensemble(2e6, 200.0, 0.10);
    const auto sched =
        quiet_schedule({0.5e-3, 1e-3, 2e-3, 4e-3, 8e-3}, StopCondition::fixed_repeats(4000));
    auto noise = quiet_noise();
    noise.spin_mixed_mode = true;
    const auto res = simulate_traces(ens, sched, noise, {}, 22);
    WindowSpec windows;
    for (const auto& tr : res.traces) {
        const auto wr = window_ratio(tr, windows);
        CHECK(wr.ratio == Catch::Approx(1.0).margin(4.0 * wr.sigma));
    }
}

TEST_CASE("window-ratio curve matches the analytic pulse-envelope composition") {
    // single homogeneous rate, huge photon budget, no instrument distortions
    const double gamma = 200.0, contrast = 0.10, T = 20e-6;
    const auto ens = uniform_ensemble(5e6, gamma, contrast, 1);
    PulseSchedule sched;
    sched.tau_list = {0.5e-3, 1e-3, 2e-3, 5e-3, 10e-3, 20e-3};
    sched.stop = StopCondition::fixed_repeats(20000);
    const auto res = simulate_traces(ens, sched, quiet_noise(), {}, 23, T);

    WindowSpec windows;
    const double pol_end = 1.0 - std::exp(-sched.readout_len / T);
    const double env_sig = env_mean(0.0, windows.signal_len, T);
    const double env_ref =
        env_mean(sched.readout_len - windows.reference_len, sched.readout_len, T);
    for (const auto& tr : res.traces) {
        const double s = contrast * pol_end * std::exp(-gamma * tr.tau);
        const double predicted = (1.0 + s * env_sig) / (1.0 + s * env_ref);
        const auto wr = window_ratio(tr, windows);
        CHECK(wr.ratio == Catch::Approx(predicted).margin(3.0 * wr.sigma));
    }
}

TEST_CASE("photon-budget stop reports the oracle acquisition time") {
    // 140 nm-style brightness, detector limited to < 2 Mcps
    const auto ens = uniform_ensemble(13e6, 150.0, 0.10);
    PulseSchedule sched;
    sched.tau_list = {1e-3, 2e-3, 5e-3, 10e-3, 20e-3};
    sched.stop = StopCondition::reference_photons(1.2e6);
    NoiseConfig noise;
    noise.drift_amplitude = 0.0;
    noise.excess_noise_factor = 1.0;

    TraceSimulator sim(ens, sched, noise, {}, 31);
    const auto res = sim.run_until(sched.stop);
    CHECK(static_cast<double>(res.reference_photons_first_tau) >= 1.2e6);

    // oracle: photons / (photons per pulse) * cycle time
    const double mu = sim.expected_reference_photons_per_pulse();
    double cycle = 0.0;
    for (double t : sched.tau_list) cycle += t + sched.readout_len;
    const double oracle_time = 1.2e6 / mu * cycle;
    CHECK(res.simulated_time == Catch::Approx(oracle_time).epsilon(0.02));

    // the detector cap kept the detected rate inside the linear range
    CHECK(res.detected_rate <= noise.detector_linear_limit);
    CHECK(res.attenuation < 1.0);
}

TEST_CASE("unreachable photon budget fails explicitly") {
    auto ens = uniform_ensemble(0.0, 200.0, 0.1);
    PulseSchedule sched;
    sched.tau_list = {1e-3, 2e-3, 4e-3, 8e-3, 16e-3};
    sched.stop = StopCondition::reference_photons(1e6);
    CHECK_THROWS_AS(simulate_traces(ens, sched, quiet_noise(), {}, 1), SimulationError);
}

TEST_CASE("validation: empty ensembles and misaligned bin grids are rejected") {
    SampledEnsemble empty;
    PulseSchedule sched;
    sched.tau_list = {1e-3};
    CHECK_THROWS_AS(simulate_traces(empty, sched, quiet_noise(), {}, 1), ValidationError);

    auto ens = uniform_ensemble(1e6, 200.0, 0.1);
    sched.bin_width = 0.7e-6; // does not divide 80 us
    CHECK_THROWS_AS(simulate_traces(ens, sched, quiet_noise(), {}, 1), ValidationError);
}

TEST_CASE("wall-clock stop fits the budget") {
    const auto ens = uniform_ensemble(1e6, 200.0, 0.1);
    PulseSchedule sched;
    sched.tau_list = {1e-3, 2e-3, 4e-3, 8e-3, 16e-3};
    sched.stop = StopCondition::wall_clock(10.0);
    const auto res = simulate_traces(ens, sched, quiet_noise(), {}, 3);
    CHECK(res.simulated_time <= 10.0);
    double cycle = 0.0;
    for (double t : sched.tau_list) cycle += t + sched.readout_len;
    CHECK(res.simulated_time >= 10.0 - 2.0 * cycle);
}

TEST_CASE("chunked acquisition splits pulses without changing totals") {
    const auto ens = uniform_ensemble(1e6, 200.0, 0.1);
    const auto sched =
        quiet_schedule({1e-3, 2e-3, 4e-3, 8e-3, 16e-3}, StopCondition::fixed_repeats(100));
    const auto res = simulate_traces(ens, sched, quiet_noise(), {}, 7, 20e-6, 1, 32);
    // 100 pulses in chunks of <= 32 -> 4 chunks per tau
    CHECK(res.traces.size() == 5 * 4);
    std::int64_t pulses = 0;
    for (const auto& tr : res.traces)
        if (tr.tau == sched.tau_list[0]) pulses += tr.pulses_accumulated;
    CHECK(pulses == 100);
}
