#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fndt1/analysis.hpp"
#include "fndt1/errors.hpp"
#include "fndt1/fit_types.hpp"
#include "fndt1/rng.hpp"

// Weighted nonlinear least squares for ratio(tau) = C exp(-(G tau)^p) + c,
// Levenberg-Marquardt damping with analytic derivatives and box bounds.
// Parameter errors come from the local quadratic model; confidence intervals
// from residual-resampling bootstrap (the tau grid is designed, not sampled,
// so pair resampling would be wrong).

namespace fndt1 {

struct FitOptions {
    std::optional<double> fix_p;      // freeze the stretch factor
    int max_iterations = 200;
    double step_tolerance = 1e-8;     // relative parameter step
    int bootstrap_draws = 200;
    std::uint64_t seed = 0xb0075ull;  // bootstrap resampling stream

    // box bounds, wide enough for every physical regime yet stopping
    // runaway fits on degenerate (already-decayed) curves
    double contrast_lo = -0.05, contrast_hi = 0.5;
    double rate_lo = 1.0, rate_hi = 1e7;
    double stretch_lo = 0.3, stretch_hi = 1.5;
    double offset_lo = 1e-12, offset_hi = 1e6;
};

namespace fit_detail {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

inline double model(const Vec4& x, double tau) {
    const double u = x[param_rate] * tau;
    const double up = std::pow(u, x[param_stretch]);
    return x[param_contrast] * std::exp(-up) + x[param_offset];
}

/// Derivatives with respect to (C, G, p, c); u = G*tau is > 0 on valid curves.
inline void jacobian_row(const Vec4& x, double tau, Vec4& out) {
    const double u = x[param_rate] * tau;
    const double up = std::pow(u, x[param_stretch]);
    const double e = std::exp(-up);
    out[param_contrast] = e;
    out[param_rate] = -x[param_contrast] * e * x[param_stretch] * up / x[param_rate];
    out[param_stretch] = u > 0.0 ? -x[param_contrast] * e * up * std::log(u) : 0.0;
    out[param_offset] = 1.0;
}

inline void clamp(Vec4& x, const FitOptions& opt) {
    x[param_contrast] = std::clamp(x[param_contrast], opt.contrast_lo, opt.contrast_hi);
    x[param_rate] = std::clamp(x[param_rate], opt.rate_lo, opt.rate_hi);
    x[param_stretch] = std::clamp(x[param_stretch], opt.stretch_lo, opt.stretch_hi);
    x[param_offset] = std::clamp(x[param_offset], opt.offset_lo, opt.offset_hi);
}

/// Solve A x = b (4x4, symmetric positive-ish) by Gaussian elimination with
/// partial pivoting; returns false on a singular pivot.
inline bool solve4(Mat4 a, Vec4 b, Vec4& x) {
    constexpr int n = 4;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return true;
}

inline bool invert4(const Mat4& a, Mat4& inv) {
    for (int col = 0; col < 4; ++col) {
        Vec4 e{0, 0, 0, 0};
        e[col] = 1.0;
        Vec4 x{};
        if (!solve4(a, e, x)) return false;
        for (int r = 0; r < 4; ++r) inv[r][col] = x[r];
    }
    return true;
}

struct Core {
    Vec4 x{};
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
    bool singular = false;
};

/// One Levenberg-Marquardt descent over the given data.
inline Core lm_descent(std::span<const double> taus, std::span<const double> ys,
                       std::span<const double> sigmas, Vec4 x0, bool p_free,
                       const FitOptions& opt) {
    const std::size_t n = taus.size();
    Core core;
    core.x = x0;
    clamp(core.x, opt);

    auto ssr_of = [&](const Vec4& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = (ys[i] - model(x, taus[i])) / sigmas[i];
            s += e * e;
        }
        return s;
    };
    core.ssr = ssr_of(core.x);

    const std::array<double, 4> lo{opt.contrast_lo, opt.rate_lo, opt.stretch_lo, opt.offset_lo};
    const std::array<double, 4> hi{opt.contrast_hi, opt.rate_hi, opt.stretch_hi, opt.offset_hi};

    double lambda = 1e-3;
    int stalled = 0;          // accepted steps with negligible SSR improvement
    double window_ssr = core.ssr; // progress watermark, refreshed every 20 iterations
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        core.iterations = iter + 1;
        Mat4 jtj{};
        Vec4 jte{};
        Vec4 row{};
        for (std::size_t i = 0; i < n; ++i) {
            jacobian_row(core.x, taus[i], row);
            const double w = 1.0 / sigmas[i];
            for (double& v : row) v *= w;
            if (!p_free) row[param_stretch] = 0.0;
            const double e = (ys[i] - model(core.x, taus[i])) / sigmas[i];
            for (int a = 0; a < 4; ++a) {
                jte[a] += row[a] * e;
                for (int b = 0; b < 4; ++b) jtj[a][b] += row[a] * row[b];
            }
        }
        if (!p_free) jtj[param_stretch][param_stretch] = 1.0; // keeps the system regular

        // active set: a parameter pinned at a bound with the gradient pointing
        // outward is frozen for this iteration, otherwise the damped step
        // creeps along the face of the box without converging
        for (int a = 0; a < 4; ++a) {
            const double tol = 1e-12 * (std::abs(lo[a]) + std::abs(hi[a]) + std::abs(core.x[a]));
            const bool at_lo = core.x[a] - lo[a] <= tol;
            const bool at_hi = hi[a] - core.x[a] <= tol;
            if ((at_lo && jte[a] < 0.0) || (at_hi && jte[a] > 0.0)) {
                jte[a] = 0.0;
                for (int b = 0; b < 4; ++b) jtj[a][b] = jtj[b][a] = 0.0;
                jtj[a][a] = 1.0;
            }
        }

        if (iter % 20 == 19) {
            if (window_ssr - core.ssr < 1e-9 * std::max(core.ssr, 1e-30)) {
                core.converged = true; // no meaningful progress in 20 iterations
                return core;
            }
            window_ssr = core.ssr;
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            Mat4 damped = jtj;
            for (int a = 0; a < 4; ++a)
                damped[a][a] += lambda * std::max(jtj[a][a], 1e-30);
            Vec4 delta{};
            if (!solve4(damped, jte, delta)) {
                core.singular = true;
                return core;
            }
            Vec4 trial = core.x;
            for (int a = 0; a < 4; ++a) trial[a] += delta[a];
            if (!p_free) trial[param_stretch] = core.x[param_stretch];
            clamp(trial, opt);

            const double trial_ssr = ssr_of(trial);
            if (trial_ssr <= core.ssr * (1.0 + 1e-14)) {
                double max_step = 0.0;
                for (int a = 0; a < 4; ++a) {
                    const double moved = std::abs(trial[a] - core.x[a]);
                    max_step = std::max(max_step, moved / std::max(std::abs(core.x[a]), 1e-12));
                }
                const double improvement = core.ssr - trial_ssr;
                core.x = trial;
                core.ssr = trial_ssr;
                lambda = std::max(lambda / 8.0, 1e-12);
                accepted = true;
                if (max_step < opt.step_tolerance) {
                    core.converged = true;
                    return core;
                }
                // descent stalled against a bound: successive accepted steps
                // move parameters but no longer reduce the residual
                stalled = improvement < 1e-10 * std::max(core.ssr, 1e-30) ? stalled + 1 : 0;
                if (stalled >= 3) {
                    core.converged = true;
                    return core;
                }
            } else {
                lambda *= 8.0;
                if (lambda > 1e14) {
                    // cannot improve: treat the current point as converged-in-place
                    core.converged = true;
                    return core;
                }
            }
        }
        if (!accepted) {
            core.converged = true;
            return core;
        }
    }
    return core; // converged stays false: iteration budget exhausted
}

} // namespace fit_detail

/// Parameter-free initial guess: the offset from the tail, the contrast from
/// the first point, and the rate from the 1/e crossing of the curve.
inline RelaxationParams initial_guess(const T1Curve& curve, const FitOptions& opt = {}) {
    const auto& pts = curve.points;
    const std::size_t n = pts.size();
    RelaxationParams g;
    g.offset = 0.5 * (pts[n - 1].ratio + pts[n - 2].ratio);
    g.contrast = pts.front().ratio - g.offset;
    if (g.contrast <= 0.0) g.contrast = 1e-3;

    const double threshold = g.offset + g.contrast / std::numbers::e;
    double tau_star = pts.back().tau;
    for (std::size_t i = 0; i < n; ++i) {
        if (pts[i].ratio < threshold) {
            if (i == 0) {
                tau_star = pts[0].tau;
            } else {
                const double y0 = pts[i - 1].ratio, y1 = pts[i].ratio;
                const double t0 = pts[i - 1].tau, t1 = pts[i].tau;
                tau_star = y0 != y1 ? t0 + (y0 - threshold) * (t1 - t0) / (y0 - y1) : t1;
            }
            break;
        }
    }
    g.rate = 1.0 / std::max(tau_star, 1e-300);
    g.stretch = opt.fix_p.value_or(1.0);

    g.contrast = std::clamp(g.contrast, opt.contrast_lo, opt.contrast_hi);
    g.rate = std::clamp(g.rate, opt.rate_lo, opt.rate_hi);
    g.stretch = std::clamp(g.stretch, opt.stretch_lo, opt.stretch_hi);
    g.offset = std::clamp(g.offset, opt.offset_lo, opt.offset_hi);
    return g;
}

/// Weighted stretched-exponential fit of a T1 curve with bootstrap intervals.
/// Throws FitNonConvergenceError when the iteration budget runs out; flags
/// (rather than throws) statistically unreliable results.
inline FitResult fit_stretched(const T1Curve& curve, const FitOptions& opt = {}) {
    using namespace fit_detail;
    const auto& pts = curve.points;
    if (pts.size() < 5)
        throw ValidationError("fit needs a curve with >= 5 points");
    for (const auto& p : pts) {
        if (!(p.sigma > 0.0)) throw ValidationError("curve sigmas must be > 0");
        if (!(p.tau > 0.0)) throw ValidationError("curve tau values must be > 0");
    }
    if (opt.fix_p && !(*opt.fix_p >= opt.stretch_lo && *opt.fix_p <= opt.stretch_hi))
        throw ValidationError("fix_p outside the stretch bounds");

    std::vector<double> taus, ys, sigmas;
    for (const auto& p : pts) {
        taus.push_back(p.tau);
        ys.push_back(p.ratio);
        sigmas.push_back(p.sigma);
    }

    const RelaxationParams g = initial_guess(curve, opt);
    const Vec4 x0{g.contrast, g.rate, g.stretch, g.offset};
    const bool p_free = !opt.fix_p.has_value();

    Core core = lm_descent(taus, ys, sigmas, x0, p_free, opt);
    if (!core.converged && !core.singular) {
        std::ostringstream diag;
        diag << "last iterate: C=" << core.x[0] << " rate=" << core.x[1]
             << " p=" << core.x[2] << " c=" << core.x[3] << " ssr=" << core.ssr
             << " after " << core.iterations << " iterations";
        throw FitNonConvergenceError("stretched-exponential fit did not converge", diag.str());
    }

    FitResult result;
    result.params.contrast = core.x[param_contrast];
    result.params.rate = core.x[param_rate];
    result.params.stretch = core.x[param_stretch];
    result.params.offset = core.x[param_offset];
    result.iterations = core.iterations;
    result.converged = core.converged;
    result.weighted_ssr = core.ssr;
    const int dof = static_cast<int>(pts.size()) - (p_free ? 4 : 3);
    result.chi2_reduced = dof > 0 ? core.ssr / dof : 0.0;

    // covariance from the local quadratic model at the optimum
    bool covariance_ok = false;
    {
        Mat4 jtj{};
        Vec4 row{};
        for (std::size_t i = 0; i < taus.size(); ++i) {
            jacobian_row(core.x, taus[i], row);
            const double w = 1.0 / sigmas[i];
            for (double& v : row) v *= w;
            if (!p_free) row[param_stretch] = 0.0;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) jtj[a][b] += row[a] * row[b];
        }
        if (!p_free) jtj[param_stretch][param_stretch] = 1.0;
        Mat4 cov{};
        if (invert4(jtj, cov)) {
            bool positive = true;
            for (int a = 0; a < 4; ++a) positive = positive && cov[a][a] >= 0.0;
            if (positive) {
                covariance_ok = true;
                result.covariance = cov;
                for (int a = 0; a < 4; ++a) result.param_sigmas[a] = std::sqrt(cov[a][a]);
                if (!p_free) {
                    result.param_sigmas[param_stretch] = 0.0;
                    for (int a = 0; a < 4; ++a)
                        result.covariance[param_stretch][a] =
                            result.covariance[a][param_stretch] = 0.0;
                }
            }
        }
        if (!covariance_ok) {
            for (auto& s : result.param_sigmas) s = std::numeric_limits<double>::infinity();
            result.notes += "near-singular curvature; ";
        }
    }

    // residual-resampling bootstrap
    std::vector<double> fitted(taus.size()), zres(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        fitted[i] = model(core.x, taus[i]);
        zres[i] = (ys[i] - fitted[i]) / sigmas[i];
    }
    std::array<std::vector<double>, 4> draws;
    int used = 0;
    for (int d = 0; d < opt.bootstrap_draws; ++d) {
        RandomStream rng(opt.seed, 0xb007ull, static_cast<std::uint64_t>(d));
        std::vector<double> yb(taus.size());
        for (std::size_t i = 0; i < taus.size(); ++i) {
            const auto pick =
                static_cast<std::size_t>(rng.uniform() * static_cast<double>(zres.size()));
            yb[i] = fitted[i] + sigmas[i] * zres[std::min(pick, zres.size() - 1)];
        }
        Core bc = lm_descent(taus, yb, sigmas, core.x, p_free, opt);
        if (!bc.converged) continue;
        ++used;
        for (int a = 0; a < 4; ++a) draws[a].push_back(bc.x[a]);
    }
    result.bootstrap_draws_used = used;
    auto quantile = [](std::vector<double>& v, double q) {
        std::sort(v.begin(), v.end());
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, v.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return v[lo] * (1.0 - frac) + v[hi] * frac;
    };
    for (int a = 0; a < 4; ++a) {
        ParamInterval ci;
        if (used >= 10) {
            ci.lo = quantile(draws[a], 0.158655);
            ci.hi = quantile(draws[a], 0.841345);
        } else {
            const double s = std::isfinite(result.param_sigmas[a]) ? result.param_sigmas[a] : 0.0;
            ci.lo = core.x[a] - s;
            ci.hi = core.x[a] + s;
        }
        // the interval always contains the point estimate
        ci.lo = std::min(ci.lo, core.x[a]);
        ci.hi = std::max(ci.hi, core.x[a]);
        result.bootstrap_intervals[a] = ci;
    }
    if (used < opt.bootstrap_draws / 2 && opt.bootstrap_draws > 0)
        result.notes += "more than half of the bootstrap refits failed; ";

    // reliability: codifies the handling of curves whose first point is
    // already decayed (huge rate error) or whose contrast is lost in noise
    double sigma_c = result.param_sigmas[param_contrast];
    double sigma_rate = result.param_sigmas[param_rate];
    if (!covariance_ok && used >= 10) {
        sigma_c = 0.5 * (result.bootstrap_intervals[param_contrast].hi -
                         result.bootstrap_intervals[param_contrast].lo);
        sigma_rate = 0.5 * (result.bootstrap_intervals[param_rate].hi -
                            result.bootstrap_intervals[param_rate].lo);
    }
    result.reliable = result.converged && !core.singular;
    if (std::abs(result.params.contrast) <= sigma_c) {
        result.reliable = false;
        result.notes += "contrast consistent with 0 at 1 sigma; ";
    }
    if (!(sigma_rate <= std::abs(result.params.rate))) {
        result.reliable = false;
        result.notes += "relative rate error exceeds 1; ";
    }
    return result;
}

} // namespace fndt1
