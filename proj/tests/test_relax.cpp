#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "fndt1/constants.hpp"
#include "fndt1/relax.hpp"
#include "fndt1/rng.hpp"

using namespace fndt1;

TEST_CASE("physical constants are fixed") {
    CHECK(physical_constants.zero_field_splitting == 2.87e9);
    CHECK(physical_constants.gd_electron_spin == 3.5);
    CHECK(physical_constants.dipolar_exponent == 6);
}

TEST_CASE("decay_signal evaluates the stretched exponential") {
    RelaxationParams q{0.10, 100.0, 1.0, 1.0};
    CHECK(decay_signal(q, 0.0) == 1.10); // exp(0) = 1, exact
    CHECK(decay_signal(q, 10e-3) == Catch::Approx(1.0367879441171442).epsilon(1e-12));

    q.stretch = 0.7;
    // 1 + 0.1*exp(-2^0.7), frozen from a high-precision evaluation
    CHECK(decay_signal(q, 20e-3) == Catch::Approx(1.0197009211449091).epsilon(1e-12));

    CHECK_THROWS_AS(decay_signal(q, -1e-9), ValidationError);
}

TEST_CASE("decay_signal at tau=0 equals contrast+offset for any parameters") {
    RandomStream rng(101);
    for (int i = 0; i < 200; ++i) {
        RelaxationParams q;
        q.contrast = 0.5 * rng.uniform();
        q.rate = std::exp(10.0 * rng.uniform());
        q.stretch = 0.3 + 1.2 * rng.uniform();
        q.offset = 2.0 * rng.uniform();
        CHECK(decay_signal(q, 0.0) == q.contrast + q.offset);
    }
}

TEST_CASE("decay_signal is monotone non-increasing for positive contrast") {
    RandomStream rng(102);
    for (int i = 0; i < 50; ++i) {
        RelaxationParams q;
        q.contrast = 0.01 + 0.4 * rng.uniform();
        q.rate = std::exp(2.0 + 8.0 * rng.uniform());
        q.stretch = 0.3 + 1.2 * rng.uniform();
        q.offset = rng.uniform();
        double prev = decay_signal(q, 0.0);
        for (int k = 1; k <= 400; ++k) {
            const double tau = static_cast<double>(k) / 400.0 * 10.0 / q.rate;
            const double v = decay_signal(q, tau);
            REQUIRE(v <= prev + 1e-15);
            prev = v;
        }
    }
}

TEST_CASE("single_nv_intensity reduces to decay_signal and adds exponents") {
    RelaxationParams q{0.1, 100.0, 1.0, 1.0};
    CHECK(single_nv_intensity(100.0, {}, 0.1, 1.0, 10e-3) ==
          Catch::Approx(decay_signal(q, 10e-3)).epsilon(1e-15));

    const std::array<double, 2> targets{50.0, 50.0};
    RelaxationParams sum{0.1, 200.0, 1.0, 1.0};
    CHECK(single_nv_intensity(100.0, targets, 0.1, 1.0, 5e-3) ==
          Catch::Approx(decay_signal(sum, 5e-3)).epsilon(1e-15));

    // 1 + 0.1 * exp(-1), frozen
    const std::array<double, 1> one{200.0};
    CHECK(single_nv_intensity(300.0, one, 0.1, 1.0, 2e-3) ==
          Catch::Approx(1.0367879441171442).epsilon(1e-12));
}

TEST_CASE("single_nv_intensity equals decay_signal with summed rate to machine precision") {
    RandomStream rng(103);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> targets;
        double total = 50.0 + 1000.0 * rng.uniform();
        const int n = static_cast<int>(rng.uniform() * 5);
        double sum = total;
        for (int k = 0; k < n; ++k) {
            const double g = 500.0 * rng.uniform();
            targets.push_back(g);
            sum += g;
        }
        const double tau = 5e-3 * rng.uniform();
        RelaxationParams q{0.1, sum, 1.0, 1.0};
        CHECK(single_nv_intensity(total, targets, 0.1, 1.0, tau) ==
              Catch::Approx(decay_signal(q, tau)).epsilon(1e-14));
    }
}

TEST_CASE("isolate_target_rate subtracts and flags") {
    auto r = isolate_target_rate(500.0, 300.0);
    CHECK(r.gamma_target == 200.0);
    CHECK_FALSE(r.below_control);

    r = isolate_target_rate(300.0, 300.0);
    CHECK(r.gamma_target == 0.0);
    CHECK_FALSE(r.below_control);

    r = isolate_target_rate(280.0, 300.0);
    CHECK(r.gamma_target == -20.0);
    CHECK(r.below_control);
}

TEST_CASE("isolate_target_rate combine/split is exact") {
    RandomStream rng(104);
    for (int i = 0; i < 200; ++i) {
        const double a = 1e5 * rng.uniform();
        const double b = 1e5 * rng.uniform();
        CHECK(isolate_target_rate(a + b, a).gamma_target == Catch::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("snr formula") {
    SnrInputs in;
    in.photon_rate = 11e6;
    in.readout_len = 80e-6;
    in.total_time = 3000.0;
    in.contrast = 0.09;
    in.gamma_intrinsic = 100.0;
    in.gamma_measured = 100.0;

    SECTION("zero contrast gives zero for all tau") {
        SnrInputs z = in;
        z.contrast = 0.0;
        for (double tau : {1e-4, 1e-3, 1e-2, 1e-1}) CHECK(snr(z, tau) == 0.0);
    }
    SECTION("frozen evaluation at tau = T1/2 for the 100 nm inputs") {
        CHECK(snr(in, 0.5 / 100.0) == Catch::Approx(370.15565640727776).epsilon(1e-12));
    }
    SECTION("doubling total time scales by sqrt(2) exactly") {
        SnrInputs twice = in;
        twice.total_time *= 2.0;
        for (double tau : {1e-4, 2e-3, 3e-2})
            CHECK(snr(twice, tau) ==
                  Catch::Approx(std::sqrt(2.0) * snr(in, tau)).epsilon(1e-12));
    }
    SECTION("linear in contrast, sqrt in rate and readout length") {
        SnrInputs mod = in;
        mod.contrast *= 3.0;
        CHECK(snr(mod, 1e-3) == Catch::Approx(3.0 * snr(in, 1e-3)).epsilon(1e-12));
        mod = in;
        mod.photon_rate *= 4.0;
        CHECK(snr(mod, 1e-3) == Catch::Approx(2.0 * snr(in, 1e-3)).epsilon(1e-12));
        mod = in;
        mod.readout_len *= 9.0;
        CHECK(snr(mod, 1e-3) == Catch::Approx(3.0 * snr(in, 1e-3)).epsilon(1e-12));
    }
    SECTION("vanishes at both ends") {
        CHECK(snr(in, 1e-16) < 1e-3);
        CHECK(snr(in, 1e4) < 1e-3);
    }
}

TEST_CASE("snr has a unique interior maximum") {
    RandomStream rng(105);
    for (int i = 0; i < 30; ++i) {
        SnrInputs in;
        in.photon_rate = 1e5 + 2e7 * rng.uniform();
        in.readout_len = 80e-6;
        in.total_time = 100.0 + 5000.0 * rng.uniform();
        in.contrast = 0.02 + 0.3 * rng.uniform();
        in.gamma_intrinsic = std::exp(2.0 + 8.0 * rng.uniform());
        in.gamma_measured = in.gamma_intrinsic * (1.0 + 3.0 * rng.uniform());
        const double g = in.gamma_measured;
        const int n = 2000;
        std::vector<double> v;
        for (int k = 0; k <= n; ++k) {
            const double tau = 0.01 / g * std::pow(1e4, static_cast<double>(k) / n);
            v.push_back(snr(in, tau));
        }
        int maxima = 0;
        for (int k = 1; k + 1 <= n; ++k)
            if (v[k] > v[k - 1] && v[k] >= v[k + 1]) ++maxima;
        CHECK(maxima == 1);
    }
}

TEST_CASE("polarization_level saturates") {
    CHECK(polarization_level(0.0) == 0.0);
    CHECK(polarization_level(80e-6, 20e-6) == Catch::Approx(0.9816843611112658).epsilon(1e-12));
    CHECK(polarization_level(1.0) == Catch::Approx(1.0));
    CHECK(polarization_level(80e-6) >= 0.98); // default constant reaches steady state
    CHECK_THROWS_AS(polarization_level(-1e-9), ValidationError);
}

TEST_CASE("dynamic_range subtracts and rejects a saturated sensor") {
    CHECK(dynamic_range(1000.0, 10000.0) == 9000.0);
    CHECK_THROWS_AS(dynamic_range(40000.0, 40000.0), ValidationError);
    CHECK(dynamic_range(12345.0, 12346.0) == 1.0);
}

TEST_CASE("RelaxationParams invariants") {
    RelaxationParams q{0.1, 200.0, 1.0, 1.0};
    CHECK_NOTHROW(q.validate());
    CHECK(q.t1() == Catch::Approx(1.0 / 200.0));
    q.rate = 0.0;
    CHECK(std::isinf(q.t1()));
    q.stretch = 2.5;
    CHECK_THROWS_AS(q.validate(), ValidationError);
    q.stretch = 1.0;
    q.contrast = 0.7;
    CHECK_THROWS_AS(q.validate(), ValidationError);
}
