#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fndt1/errors.hpp"
#include "fndt1/relax.hpp"

// Experiment planning on top of the SNR formula: the SNR-optimal evolution
// time and log-spaced tau grids for curve acquisition.

namespace fndt1 {

/// Evolution time maximizing the SNR, found by golden-section search on
/// log(tau) to 1e-6 relative tolerance. The SNR is unimodal in tau, and the
/// maximum always falls near 1/gamma_measured, so a generous fixed bracket
/// around it is safe.
inline double optimal_tau(const SnrInputs& in) {
    in.validate();
    if (!(in.contrast > 0.0))
        throw ValidationError("optimal_tau is undefined at zero contrast");

    double lo = std::log(1e-3 / in.gamma_measured);
    double hi = std::log(1e3 / in.gamma_measured);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = snr(in, std::exp(a));
    double fb = snr(in, std::exp(b));
    while (hi - lo > 1e-7) {
        if (fa < fb) {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = snr(in, std::exp(b));
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = snr(in, std::exp(a));
        }
    }
    return std::exp(0.5 * (lo + hi));
}

/// Log-spaced tau grid from 0.05/gamma to 5/gamma, snapped to the schedule's
/// time resolution and deduplicated. The grid always brackets 1/gamma.
inline std::vector<double> design_tau_grid(double gamma_guess, int n_points,
                                           double time_resolution = min_resolvable_tau) {
    if (!(gamma_guess > 0.0)) throw ValidationError("gamma_guess must be > 0");
    if (n_points < 5) throw ValidationError("a tau grid needs at least 5 points");
    if (!(time_resolution > 0.0)) throw ValidationError("time resolution must be > 0");

    const double lo = 0.05 / gamma_guess;
    const double hi = 5.0 / gamma_guess;
    std::vector<double> grid;
    for (int i = 0; i < n_points; ++i) {
        const double f = n_points == 1 ? 0.0
                                       : static_cast<double>(i) / static_cast<double>(n_points - 1);
        double tau = lo * std::pow(hi / lo, f);
        tau = std::max(1.0, std::round(tau / time_resolution)) * time_resolution;
        if (grid.empty() || tau > grid.back()) grid.push_back(tau);
    }
    if (grid.size() < 5)
        throw ValidationError("tau grid collapsed below the time resolution (" +
                              std::to_string(grid.size()) + " distinct points)");
    return grid;
}

} // namespace fndt1
