#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fndt1/fit.hpp"
#include "fndt1/planner.hpp"
#include "fndt1/rng.hpp"

using namespace fndt1;

namespace {

/// Synthetic curve straight from the decay law, with optional Gaussian noise
/// of the quoted sigma.
T1Curve synthetic_curve(const RelaxationParams& truth, double sigma, std::uint64_t seed,
                        int n_points = 20, double span_lo = 0.05, double span_hi = 5.0) {
    T1Curve curve;
    RandomStream rng(seed);
    for (int i = 0; i < n_points; ++i) {
        const double f = static_cast<double>(i) / (n_points - 1);
        const double tau =
            span_lo / truth.rate * std::pow(span_hi / span_lo, f);
        CurvePoint p;
        p.tau = tau;
        p.sigma = sigma;
        p.ratio = decay_signal(truth, tau) + (seed ? sigma * rng.normal() : 0.0);
        p.photons_signal = 100000;
        p.photons_reference = 500000;
        p.pulses = 1000;
        p.acquisition_order = i;
        curve.points.push_back(p);
    }
    return curve;
}

} // namespace

TEST_CASE("noiseless round-trip recovers the generator to 1e-6 relative") {
    const RelaxationParams truth{0.10, 200.0, 1.0, 1.0};
    const auto curve = synthetic_curve(truth, 1e-4, 0);
    FitOptions opt;
    opt.bootstrap_draws = 50;
    const auto fit = fit_stretched(curve, opt);
    CHECK(fit.converged);
    CHECK(fit.params.contrast == Catch::Approx(0.10).epsilon(1e-6));
    CHECK(fit.params.rate == Catch::Approx(200.0).epsilon(1e-6));
    CHECK(fit.params.stretch == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(fit.params.offset == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(fit.reliable);
}

TEST_CASE("stretched generator is recovered with p < 1") {
    const RelaxationParams truth{0.10, 300.0, 0.7, 1.0};
    const auto curve = synthetic_curve(truth, 1e-4, 0, 25, 0.02, 10.0);
    const auto fit = fit_stretched(curve, FitOptions{.bootstrap_draws = 0});
    CHECK(fit.params.rate == Catch::Approx(300.0).epsilon(1e-4));
    CHECK(fit.params.stretch == Catch::Approx(0.7).epsilon(1e-4));
}

TEST_CASE("fix_p on exponential data agrees with the free-p fit") {
    const RelaxationParams truth{0.10, 200.0, 1.0, 1.0};
    const auto curve = synthetic_curve(truth, 5e-4, 42);
    const auto free_fit = fit_stretched(curve, FitOptions{.bootstrap_draws = 100});
    FitOptions fixed;
    fixed.fix_p = 1.0;
    fixed.bootstrap_draws = 100;
    const auto fixed_fit = fit_stretched(curve, fixed);
    CHECK(fixed_fit.params.stretch == 1.0);
    CHECK(fixed_fit.param_sigmas[param_stretch] == 0.0);
    const double halfwidth = 0.5 * (free_fit.bootstrap_intervals[param_rate].hi -
                                    free_fit.bootstrap_intervals[param_rate].lo);
    CHECK(std::abs(fixed_fit.params.rate - free_fit.params.rate) <= 3.0 * halfwidth);
}

TEST_CASE("fit is invariant under point reordering") {
    const RelaxationParams truth{0.12, 150.0, 0.9, 1.0};
    auto curve = synthetic_curve(truth, 3e-4, 7);
    const auto base = fit_stretched(curve, FitOptions{.bootstrap_draws = 0});

    auto shuffled = curve;
    std::reverse(shuffled.points.begin(), shuffled.points.end());
    std::swap(shuffled.points[3], shuffled.points[11]);
    const auto refit = fit_stretched(shuffled, FitOptions{.bootstrap_draws = 0});
    CHECK(refit.params.rate == Catch::Approx(base.params.rate).epsilon(1e-9));
    CHECK(refit.params.stretch == Catch::Approx(base.params.stretch).epsilon(1e-9));
    CHECK(refit.params.contrast == Catch::Approx(base.params.contrast).epsilon(1e-9));
}

TEST_CASE("weighted-least-squares homogeneity under joint rescaling") {
    const RelaxationParams truth{0.10, 200.0, 1.0, 1.0};
    auto curve = synthetic_curve(truth, 5e-4, 9);
    const auto base = fit_stretched(curve, FitOptions{.bootstrap_draws = 0});

    const double k = 2.5;
    auto scaled = curve;
    for (auto& p : scaled.points) {
        p.ratio *= k;
        p.sigma *= k;
    }
    FitOptions opt;
    opt.bootstrap_draws = 0;
    opt.contrast_hi = 0.5 * k; // keep the box from truncating the scaled optimum
    opt.offset_hi = 1e6;
    const auto refit = fit_stretched(scaled, opt);
    CHECK(refit.params.rate == Catch::Approx(base.params.rate).epsilon(1e-6));
    CHECK(refit.params.stretch == Catch::Approx(base.params.stretch).epsilon(1e-6));
    CHECK(refit.params.contrast == Catch::Approx(k * base.params.contrast).epsilon(1e-6));
    CHECK(refit.params.offset == Catch::Approx(k * base.params.offset).epsilon(1e-6));
}

TEST_CASE("chi2_reduced is near 1 for correctly specified noise") {
    const RelaxationParams truth{0.10, 200.0, 1.0, 1.0};
    std::vector<double> chi2s;
    for (std::uint64_t seed = 11; seed <= 20; ++seed) {
        const auto curve = synthetic_curve(truth, 1e-3, seed, 24);
        const auto fit = fit_stretched(curve, FitOptions{.bootstrap_draws = 0});
        CHECK(fit.chi2_reduced > 0.25); // single-seed band is wide at 20 dof
        CHECK(fit.chi2_reduced < 2.5);
        chi2s.push_back(fit.chi2_reduced);
    }
    std::sort(chi2s.begin(), chi2s.end());
    const double median = 0.5 * (chi2s[4] + chi2s[5]);
    CHECK(median > 0.5);
    CHECK(median < 2.0);
}

TEST_CASE("bootstrap intervals contain the point estimate") {
    const RelaxationParams truth{0.10, 200.0, 1.0, 1.0};
    const auto curve = synthetic_curve(truth, 1e-3, 21);
    const auto fit = fit_stretched(curve, FitOptions{.bootstrap_draws = 200});
    CHECK(fit.bootstrap_draws_used > 150);
    for (int a = 0; a < 4; ++a) {
        const double est = a == param_contrast ? fit.params.contrast
                           : a == param_rate   ? fit.params.rate
                           : a == param_stretch ? fit.params.stretch
                                                : fit.params.offset;
        CHECK(fit.bootstrap_intervals[a].lo <= est);
        CHECK(fit.bootstrap_intervals[a].hi >= est);
    }
}

TEST_CASE("initial guess encodes the 1/e crossing") {
    const RelaxationParams truth{0.10, 200.0, 1.0, 1.0};
    const auto curve = synthetic_curve(truth, 1e-4, 0, 40, 0.02, 8.0);
    const auto guess = initial_guess(curve);
    CHECK(guess.rate == Catch::Approx(200.0).epsilon(0.2));
    CHECK(guess.contrast == Catch::Approx(0.10).epsilon(0.1));
    CHECK(guess.offset == Catch::Approx(1.0).epsilon(0.01));
    CHECK(guess.stretch == 1.0);
}

TEST_CASE("already-decayed low-contrast curves are flagged unreliable") {
    // 30 nm-like regime: by the first resolvable tau the decay is gone and the
    // remaining points are offset plus noise with a tiny apparent contrast
    RandomStream rng(33);
    T1Curve curve;
    for (int i = 0; i < 20; ++i) {
        CurvePoint p;
        p.tau = 5e-6 * (i + 1);
        p.sigma = 8e-3; // quoted error 4x the apparent contrast, as in the 2 +- 8 case
        p.ratio = 1.0 + (i == 0 ? 0.002 : 0.0) + p.sigma * rng.normal();
        p.photons_signal = 240000;
        p.photons_reference = 1200000;
        p.acquisition_order = i;
        curve.points.push_back(p);
    }
    const auto fit = fit_stretched(curve, FitOptions{.bootstrap_draws = 100});
    CHECK_FALSE(fit.reliable);
    CHECK_FALSE(fit.notes.empty());
}

TEST_CASE("fit validation errors") {
    T1Curve tiny;
    for (int i = 0; i < 4; ++i)
        tiny.points.push_back({1e-3 * (i + 1), 1.0, 1e-3, 100, 100, 1, i});
    CHECK_THROWS_AS(fit_stretched(tiny), ValidationError);

    const RelaxationParams truth{0.10, 200.0, 1.0, 1.0};
    auto bad = synthetic_curve(truth, 1e-3, 5);
    bad.points[3].sigma = 0.0;
    CHECK_THROWS_AS(fit_stretched(bad), ValidationError);

    FitOptions opt;
    opt.fix_p = 7.0; // outside the stretch bounds
    const auto curve = synthetic_curve(truth, 1e-3, 5);
    CHECK_THROWS_AS(fit_stretched(curve, opt), ValidationError);
}
