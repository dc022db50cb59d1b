#pragma once

#include <array>
#include <string>

#include "fndt1/relax.hpp"

namespace fndt1 {

/// Parameter order used by sigmas, covariance and bootstrap intervals.
enum ParamIndex : int {
    param_contrast = 0,
    param_rate = 1,
    param_stretch = 2,
    param_offset = 3,
};

inline constexpr std::array<const char*, 4> param_names = {"contrast", "rate", "stretch",
                                                           "offset"};

struct ParamInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Outcome of a stretched-exponential fit.
struct FitResult {
    RelaxationParams params;
    std::array<double, 4> param_sigmas{};
    std::array<std::array<double, 4>, 4> covariance{};
    std::array<ParamInterval, 4> bootstrap_intervals{};
    double chi2_reduced = 0.0;
    double weighted_ssr = 0.0;
    int iterations = 0;
    int bootstrap_draws_used = 0;
    bool converged = false;
    bool reliable = false;
    std::string notes;
};

} // namespace fndt1
