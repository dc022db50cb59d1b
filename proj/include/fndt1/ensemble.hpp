#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fndt1/constants.hpp"
#include "fndt1/errors.hpp"
#include "fndt1/rng.hpp"

// Heterogeneous FND/NV population sampling. A suspension holds far more
// particles than is affordable to simulate one by one, so a capped number of
// representative particles is drawn and each carries the brightness of its
// share of the real population. Target coupling is coarse-grained to a bulk
// Gd3+ concentration through an r^-6 proximity kernel in the NV depth.

namespace fndt1 {

/// One NV defect of the sampled population.
struct NVEmitter {
    double gamma_intrinsic = 0.0; // s^-1
    double depth = 0.0;           // nm, distance from the particle surface
    double brightness = 0.0;      // detected counts/s attributed to this emitter
    double contrast = 0.0;        // spin contrast after scattering attenuation
};

/// Concentration-dependent scattering attenuation. Both factors are ~1 below
/// the 25 ug/ml working threshold and fall monotonically above it; the
/// contrast law is the steeper of the two.
struct ScatteringModel {
    double intensity_scale = 1250.0; // ug/ml, e-folding of the intensity law
    double contrast_scale = 250.0;   // ug/ml, scale of the gaussian contrast law
};

struct ScatteringFactors {
    double intensity = 1.0;
    double contrast = 1.0;
};

inline ScatteringFactors scattering_factor(double fnd_concentration,
                                           const ScatteringModel& model = {}) {
    if (!(fnd_concentration >= 0.0)) throw ValidationError("FND concentration must be >= 0");
    const double ci = fnd_concentration / model.intensity_scale;
    const double cc = fnd_concentration / model.contrast_scale;
    return ScatteringFactors{std::exp(-ci), std::exp(-cc * cc)};
}

/// Bulk paramagnetic target. The per-emitter rate is
///     coupling_constant * gd_concentration / (depth + softening_depth)^6
/// plus an optional uniform injected rate used for controlled diagnostics.
struct TargetSpec {
    double gd_concentration = 0.0;  // mM
    double coupling_constant = 0.0; // s^-1 nm^6 / mM
    double softening_depth = 1.0;   // nm; keeps the kernel finite at depth 0
    double uniform_rate = 0.0;      // s^-1 added to every emitter

    bool active() const {
        return (gd_concentration > 0.0 && coupling_constant > 0.0) || uniform_rate > 0.0;
    }

    void validate() const {
        if (!(gd_concentration >= 0.0)) throw ValidationError("gd_concentration must be >= 0");
        if (!(coupling_constant >= 0.0)) throw ValidationError("coupling_constant must be >= 0");
        if (!(softening_depth > 0.0)) throw ValidationError("softening_depth must be > 0");
        if (!(uniform_rate >= 0.0)) throw ValidationError("uniform_rate must be >= 0");
    }
};

inline double target_rate_for_emitter(const NVEmitter& emitter, const TargetSpec& target) {
    target.validate();
    if (!(emitter.depth >= 0.0)) throw ValidationError("emitter depth must be >= 0");
    const double r = emitter.depth + target.softening_depth;
    const double r3 = r * r * r;
    return target.coupling_constant * target.gd_concentration / (r3 * r3) + target.uniform_rate;
}

/// Mole-conserving concentration of pooled solutions: sum(c_i v_i) / sum(v_i).
inline double mix_solutions(std::span<const double> volumes_ul,
                            std::span<const double> concentrations_mm) {
    if (volumes_ul.empty()) throw ValidationError("mix_solutions: empty volume list");
    if (volumes_ul.size() != concentrations_mm.size())
        throw ValidationError("mix_solutions: volume and concentration lists differ in length");
    double moles = 0.0, volume = 0.0;
    for (std::size_t i = 0; i < volumes_ul.size(); ++i) {
        if (!(volumes_ul[i] > 0.0)) throw ValidationError("mix_solutions: volumes must be > 0");
        if (!(concentrations_mm[i] >= 0.0))
            throw ValidationError("mix_solutions: concentrations must be >= 0");
        moles += volumes_ul[i] * concentrations_mm[i];
        volume += volumes_ul[i];
    }
    return moles / volume;
}

/// Population description behind a simulated suspension.
struct EnsembleSpec {
    std::string name;                      // preset id, informational
    double particle_diameter = 100.0;      // nm, nominal
    double diameter_cv = 0.15;             // fractional coefficient of variation
    double nv_per_particle_mean = 0.0;     // NV count for a nominal-diameter particle
    double gamma_intrinsic_median = 100.0; // s^-1
    double gamma_intrinsic_logsigma = 0.0; // dimensionless
    double brightness_per_particle = 0.0;  // counts/s at the detector, nominal diameter
    double base_contrast = 0.09;           // spin contrast before scattering losses
    double fnd_concentration = 20.0;       // ug/ml
    double beam_volume_ml = 3e-5;          // effective detection volume
    std::uint64_t seed = 1;
    int max_sampled_emitters = 20000;      // approximate size of the representative sample
    bool surface_weighted_depths = false;  // optional mode for sensitivity studies
    ScatteringModel scattering{};

    /// Mass of one nominal-diameter particle, ug.
    double particle_mass_ug() const {
        const double r_nm = particle_diameter / 2.0;
        const double volume_nm3 = (4.0 / 3.0) * std::numbers::pi * r_nm * r_nm * r_nm;
        // 1 nm^3 = 1e-21 cm^3; 1 g = 1e6 ug
        return diamond_density_g_per_cm3 * volume_nm3 * 1e-15;
    }

    /// Number of particles inside the detection volume (derived).
    double particle_count_in_beam() const {
        return fnd_concentration * beam_volume_ml / particle_mass_ug();
    }

    void validate() const {
        if (!(particle_diameter > 0.0)) throw ValidationError("particle diameter must be > 0");
        if (!(diameter_cv >= 0.0)) throw ValidationError("diameter CV must be >= 0");
        if (!(nv_per_particle_mean >= 0.0))
            throw ValidationError("nv_per_particle_mean must be >= 0");
        if (!(gamma_intrinsic_median > 0.0))
            throw ValidationError("gamma_intrinsic_median must be > 0");
        if (!(gamma_intrinsic_logsigma >= 0.0))
            throw ValidationError("gamma_intrinsic_logsigma must be >= 0");
        if (!(brightness_per_particle >= 0.0))
            throw ValidationError("brightness_per_particle must be >= 0");
        if (!(base_contrast >= 0.0 && base_contrast <= 0.5))
            throw ValidationError("base_contrast must lie in [0, 0.5]");
        if (!(fnd_concentration >= 0.0)) throw ValidationError("fnd_concentration must be >= 0");
        if (!(beam_volume_ml > 0.0)) throw ValidationError("beam_volume_ml must be > 0");
        if (max_sampled_emitters < 1) throw ValidationError("max_sampled_emitters must be >= 1");
    }
};

/// Result of sampling an EnsembleSpec: the representative emitters plus the
/// bookkeeping linking them back to the real population.
struct SampledEnsemble {
    std::vector<NVEmitter> emitters;
    double particle_count_in_beam = 0.0;
    double representation_weight = 1.0; // real particles per sampled particle
    double total_brightness = 0.0;      // counts/s, sum over emitters
    ScatteringFactors scattering{};
    bool empty_flagged = false;         // zero concentration (valid, flagged)
};

/// Draw a representative emitter sample. Deterministic for a fixed spec:
/// the same (spec, seed) always yields the identical emitter list.
inline SampledEnsemble sample_ensemble(const EnsembleSpec& spec) {
    spec.validate();

    SampledEnsemble out;
    out.scattering = scattering_factor(spec.fnd_concentration, spec.scattering);
    out.particle_count_in_beam = spec.particle_count_in_beam();
    if (out.particle_count_in_beam < 1.0 || spec.nv_per_particle_mean <= 0.0) {
        out.empty_flagged = true;
        return out;
    }

    // enough particles for the emitter budget, but never so few that the
    // particle-to-particle spread is misrepresented
    const double nv_mean = spec.nv_per_particle_mean;
    auto wanted =
        static_cast<std::int64_t>(std::ceil(spec.max_sampled_emitters / std::max(1.0, nv_mean)));
    wanted = std::max<std::int64_t>(wanted, 32);
    const auto n_particles = std::max<std::int64_t>(
        1, std::min<std::int64_t>(wanted,
                                  static_cast<std::int64_t>(out.particle_count_in_beam)));
    out.representation_weight = out.particle_count_in_beam / static_cast<double>(n_particles);

    RandomStream rng(spec.seed, 0x3a3ull /* ensemble stream */);
    const double diameter_sigma =
        spec.diameter_cv > 0.0 ? std::sqrt(std::log1p(spec.diameter_cv * spec.diameter_cv)) : 0.0;
    const double effective_contrast = spec.base_contrast * out.scattering.contrast;

    std::vector<double> weights;
    for (std::int64_t ip = 0; ip < n_particles; ++ip) {
        const double d = spec.particle_diameter *
                         (diameter_sigma > 0.0 ? std::exp(diameter_sigma * rng.normal()) : 1.0);
        const double radius = d / 2.0;
        const double volume_ratio = std::pow(d / spec.particle_diameter, 3);
        const auto nv_count = rng.poisson(nv_mean * volume_ratio);
        if (nv_count == 0) continue;

        // particle brightness scales with its actual volume; split among its
        // NVs with lognormal jitter normalized so the particle total is exact
        const double particle_brightness =
            spec.brightness_per_particle * volume_ratio * out.representation_weight *
            out.scattering.intensity;
        weights.clear();
        double weight_sum = 0.0;
        for (std::int64_t j = 0; j < nv_count; ++j) {
            const double w = std::exp(0.25 * rng.normal());
            weights.push_back(w);
            weight_sum += w;
        }
        for (std::int64_t j = 0; j < nv_count; ++j) {
            NVEmitter e;
            e.gamma_intrinsic =
                spec.gamma_intrinsic_median *
                (spec.gamma_intrinsic_logsigma > 0.0
                     ? std::exp(spec.gamma_intrinsic_logsigma * rng.normal())
                     : 1.0);
            // radial position uniform over the particle volume (density ~ r^2),
            // or biased to the surface (density ~ r^8) in the optional mode
            const double u = rng.uniform();
            const double r = radius * std::pow(u, spec.surface_weighted_depths ? 1.0 / 9.0 : 1.0 / 3.0);
            e.depth = radius - r;
            e.brightness = particle_brightness * weights[static_cast<std::size_t>(j)] / weight_sum;
            e.contrast = effective_contrast;
            out.emitters.push_back(e);
        }
    }

    if (out.emitters.empty()) out.empty_flagged = true;
    for (const auto& e : out.emitters) out.total_brightness += e.brightness;
    return out;
}

} // namespace fndt1
