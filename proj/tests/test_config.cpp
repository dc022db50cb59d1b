#include <catch2/catch_amalgamated.hpp>

#include "fndt1/compare.hpp"
#include "fndt1/config.hpp"

using namespace fndt1;

namespace {

json base_config() {
    return json::parse(R"({
        "version": 1,
        "seed": 42,
        "out_dir": "out/test",
        "threads": 1,
        "ensemble": {"preset": "fnd-100nm", "fnd_concentration": "20 ug/ml"},
        "target": {"mix": {"volumes": ["170 uL", "30 uL"],
                           "concentrations": ["0 mM", "26.6 mM"]}},
        "schedule": {
            "readout_len": "80 us",
            "bin_width": "0.5 us",
            "interleave": true,
            "tau_grid": {"gamma_guess": "250 /s", "points": 12},
            "stop": {"mode": "reference_photons", "photons": 100000}
        },
        "noise": {
            "drift_amplitude": 0.025,
            "drift_timescale": "10 s",
            "excess_noise_factor": 2.0,
            "detector_linear_limit": "2 Mcps",
            "dead_time": "25 ns",
            "spin_mixed": false
        },
        "instrument": {"polarization_time_constant": "20 us"},
        "analysis": {"signal_window": "2 us", "reference_window": "10 us",
                     "fix_p": null, "bootstrap_draws": 100}
    })");
}

} // namespace

TEST_CASE("full config parses with explicit units") {
    const auto cfg = parse_run_config(base_config());
    CHECK(cfg.seed == 42);
    CHECK(cfg.ensemble.name == "fnd-100nm");
    CHECK(cfg.ensemble.fnd_concentration == 20.0);
    CHECK(cfg.target.gd_concentration == Catch::Approx(3.99));
    CHECK(cfg.schedule.readout_len == Catch::Approx(80e-6));
    CHECK(cfg.schedule.tau_list.size() == 12);
    CHECK(cfg.schedule.stop.mode == StopCondition::Mode::reference_photons);
    CHECK(cfg.noise.detector_linear_limit == Catch::Approx(2e6));
    CHECK(cfg.noise.dead_time == Catch::Approx(25e-9));
    CHECK(cfg.analysis.bootstrap_draws == 100);
    CHECK_FALSE(cfg.analysis.fix_p.has_value());
    CHECK(cfg.config_hash != 0);
}

TEST_CASE("config hash is stable and sensitive") {
    const auto a = parse_run_config(base_config());
    const auto b = parse_run_config(base_config());
    CHECK(a.config_hash == b.config_hash);

    auto doc = base_config();
    doc["seed"] = 43;
    CHECK(parse_run_config(doc).config_hash != a.config_hash);
}

TEST_CASE("overrides replace seed, out_dir and preset") {
    ConfigOverrides ov;
    ov.seed = 7;
    ov.out_dir = "elsewhere";
    ov.preset = "fnd-50nm";
    const auto cfg = parse_run_config(base_config(), ov);
    CHECK(cfg.seed == 7);
    CHECK(cfg.out_dir == "elsewhere");
    CHECK(cfg.ensemble.name == "fnd-50nm");
}

TEST_CASE("unknown keys are rejected") {
    auto doc = base_config();
    doc["noise"]["excess_factor_typo"] = 2.0;
    CHECK_THROWS_AS(parse_run_config(doc), ValidationError);

    doc = base_config();
    doc["unknown_top_level"] = 1;
    CHECK_THROWS_AS(parse_run_config(doc), ValidationError);
}

TEST_CASE("units are mandatory for physical quantities") {
    auto doc = base_config();
    doc["schedule"]["readout_len"] = 80e-6; // bare number
    CHECK_THROWS_AS(parse_run_config(doc), ValidationError);

    doc = base_config();
    doc["schedule"]["tau_grid"]["gamma_guess"] = "250"; // missing unit
    CHECK_THROWS_AS(parse_run_config(doc), ValidationError);
}

TEST_CASE("missing preset fails validation before any run") {
    auto doc = base_config();
    doc["ensemble"]["preset"] = "fnd-12nm";
    CHECK_THROWS_AS(parse_run_config(doc), ValidationError);
}

TEST_CASE("schedule needs exactly one tau source") {
    auto doc = base_config();
    doc["schedule"]["tau_list"] = {"1 ms", "2 ms"};
    CHECK_THROWS_AS(parse_run_config(doc), ValidationError); // both

    doc = base_config();
    doc["schedule"].erase("tau_grid");
    CHECK_THROWS_AS(parse_run_config(doc), ValidationError); // neither

    doc = base_config();
    doc["schedule"].erase("tau_grid");
    doc["schedule"]["tau_list"] = {"1 ms", "2 ms", "4 ms", "8 ms", "16 ms"};
    const auto cfg = parse_run_config(doc);
    CHECK(cfg.schedule.tau_list.size() == 5);
    CHECK(cfg.schedule.tau_list[0] == Catch::Approx(1e-3));
}

TEST_CASE("explicit ensembles parse without a preset") {
    auto doc = base_config();
    doc["ensemble"] = json{{"particle_diameter", "100 nm"},
                           {"nv_per_particle_mean", 50.0},
                           {"gamma_intrinsic_median", "200 /s"},
                           {"gamma_intrinsic_logsigma", 0.0},
                           {"brightness_per_particle", "20 cps"},
                           {"base_contrast", 0.1},
                           {"fnd_concentration", "20 ug/ml"}};
    const auto cfg = parse_run_config(doc);
    CHECK(cfg.ensemble.gamma_intrinsic_median == 200.0);
    CHECK(cfg.ensemble.nv_per_particle_mean == 50.0);
}

TEST_CASE("uniform-rate target injection parses") {
    auto doc = base_config();
    doc["target"] = json{{"uniform_rate", "300 /s"}};
    const auto cfg = parse_run_config(doc);
    CHECK(cfg.target.uniform_rate == 300.0);
    CHECK(cfg.target.active());
}

TEST_CASE("compare config parses and validates sizes") {
    auto doc = json::parse(R"({
        "seed": 5,
        "out_dir": "out/cmp",
        "compare": {
            "sizes": ["fnd-50nm", "fnd-100nm", "fnd-140nm"],
            "fnd_concentration": "20 ug/ml",
            "tau_points": 10
        },
        "schedule": {"readout_len": "80 us", "bin_width": "1 us",
                     "stop": {"mode": "fixed_repeats", "repeats": 50}}
    })");
    const auto cfg = parse_compare_config(doc);
    CHECK(cfg.sizes.size() == 3);
    CHECK(cfg.gd_concentration_after_mix() == Catch::Approx(3.99));

    doc["compare"]["sizes"] = {"fnd-100nm"};
    CHECK_THROWS_AS(parse_compare_config(doc), ValidationError);
    doc["compare"]["sizes"] = {"fnd-100nm", "fnd-13nm"};
    CHECK_THROWS_AS(parse_compare_config(doc), ValidationError);
}
