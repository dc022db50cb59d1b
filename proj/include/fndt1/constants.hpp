#pragma once

namespace fndt1 {

/// Fixed physical constants of the sensing system. Read-only.
struct PhysicalConstants {
    /// NV ground-state zero-field splitting D, Hz. Housed for completeness;
    /// no microwave physics is modeled.
    double zero_field_splitting = 2.87e9;

    /// Electron spin S of the chelated Gd3+ target.
    double gd_electron_spin = 3.5;

    /// Distance exponent of the NV-target dipolar coupling (1/r^6).
    int dipolar_exponent = 6;
};

inline constexpr PhysicalConstants physical_constants{};

/// Density of diamond, g/cm^3; converts particle volume to mass when deriving
/// how many particles a mass concentration puts in the beam.
inline constexpr double diamond_density_g_per_cm3 = 3.51;

} // namespace fndt1
