#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

#include "fndt1/errors.hpp"

// Unit-tagged quantity parsing for config files and the CLI. Every physical
// quantity in external inputs carries an explicit unit suffix ("80 us",
// "200 /s", "11 Mcps"); internal code uses fixed base units throughout:
// seconds, s^-1, counts/s, mM, ug/ml, nm.

namespace fndt1::units {

enum class Dimension {
    time,               // base: s
    rate,               // base: s^-1
    count_rate,         // base: counts/s
    molar_concentration,// base: mM
    mass_concentration, // base: ug/ml
    length,             // base: nm
    volume,             // base: uL
};

inline const char* dimension_name(Dimension d) {
    switch (d) {
        case Dimension::time: return "time";
        case Dimension::rate: return "rate";
        case Dimension::count_rate: return "count rate";
        case Dimension::molar_concentration: return "molar concentration";
        case Dimension::mass_concentration: return "mass concentration";
        case Dimension::length: return "length";
        case Dimension::volume: return "volume";
    }
    return "?";
}

inline const char* accepted_units(Dimension d) {
    switch (d) {
        case Dimension::time: return "s, ms, us, ns";
        case Dimension::rate: return "/s, 1/s, /ms, 1/ms, kHz-equivalent not accepted";
        case Dimension::count_rate: return "cps, kcps, Mcps, counts/s";
        case Dimension::molar_concentration: return "M, mM, uM";
        case Dimension::mass_concentration: return "ug/ml, mg/ml";
        case Dimension::length: return "nm, um";
        case Dimension::volume: return "uL, mL";
    }
    return "";
}

namespace detail {

inline double unit_scale(Dimension d, std::string_view unit, bool& ok) {
    ok = true;
    switch (d) {
        case Dimension::time:
            if (unit == "s") return 1.0;
            if (unit == "ms") return 1e-3;
            if (unit == "us") return 1e-6;
            if (unit == "ns") return 1e-9;
            break;
        case Dimension::rate:
            if (unit == "/s" || unit == "1/s" || unit == "s^-1") return 1.0;
            if (unit == "/ms" || unit == "1/ms" || unit == "ms^-1") return 1e3;
            break;
        case Dimension::count_rate:
            if (unit == "cps" || unit == "counts/s") return 1.0;
            if (unit == "kcps") return 1e3;
            if (unit == "Mcps") return 1e6;
            break;
        case Dimension::molar_concentration:
            if (unit == "mM") return 1.0;
            if (unit == "uM") return 1e-3;
            if (unit == "M") return 1e3;
            break;
        case Dimension::mass_concentration:
            if (unit == "ug/ml" || unit == "ug/mL") return 1.0;
            if (unit == "mg/ml" || unit == "mg/mL") return 1e3;
            break;
        case Dimension::length:
            if (unit == "nm") return 1.0;
            if (unit == "um") return 1e3;
            break;
        case Dimension::volume:
            if (unit == "uL" || unit == "ul") return 1.0;
            if (unit == "mL" || unit == "ml") return 1e3;
            break;
    }
    ok = false;
    return 0.0;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

} // namespace detail

/// Parse "<value> <unit>" into the dimension's base unit. The unit suffix is
/// mandatory; a bare number is rejected so s^-1 vs ms^-1 mixups cannot sneak
/// through a config file.
inline double parse_quantity(std::string_view text, Dimension dim, std::string_view field = {}) {
    const std::string where = field.empty() ? std::string() : " for '" + std::string(field) + "'";
    std::string_view s = detail::trim(text);
    if (s.empty())
        throw ValidationError("empty " + std::string(dimension_name(dim)) + " quantity" + where);

    // split at the first character that cannot belong to the number
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '+' ||
                            s[i] == '-' || s[i] == '.' || s[i] == 'e' || s[i] == 'E')) {
        // 'e'/'E' only counts as part of the number when followed by digit/sign
        if ((s[i] == 'e' || s[i] == 'E') &&
            !(i + 1 < s.size() && (std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
                                   s[i + 1] == '+' || s[i + 1] == '-')))
            break;
        ++i;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + i, value);
    if (ec != std::errc() || ptr != s.data() + i)
        throw ValidationError("cannot parse numeric value in '" + std::string(s) + "'" + where);

    std::string_view unit = detail::trim(s.substr(i));
    if (unit.empty())
        throw ValidationError("missing unit on '" + std::string(s) + "'" + where +
                              " (expected one of: " + accepted_units(dim) + ")");
    bool ok = false;
    const double scale = detail::unit_scale(dim, unit, ok);
    if (!ok)
        throw ValidationError("unknown " + std::string(dimension_name(dim)) + " unit '" +
                              std::string(unit) + "'" + where +
                              " (expected one of: " + accepted_units(dim) + ")");
    return value * scale;
}

inline double parse_time(std::string_view s, std::string_view field = {}) {
    return parse_quantity(s, Dimension::time, field);
}
inline double parse_rate(std::string_view s, std::string_view field = {}) {
    return parse_quantity(s, Dimension::rate, field);
}
inline double parse_count_rate(std::string_view s, std::string_view field = {}) {
    return parse_quantity(s, Dimension::count_rate, field);
}
inline double parse_molar(std::string_view s, std::string_view field = {}) {
    return parse_quantity(s, Dimension::molar_concentration, field);
}
inline double parse_mass_concentration(std::string_view s, std::string_view field = {}) {
    return parse_quantity(s, Dimension::mass_concentration, field);
}
inline double parse_length(std::string_view s, std::string_view field = {}) {
    return parse_quantity(s, Dimension::length, field);
}
inline double parse_volume(std::string_view s, std::string_view field = {}) {
    return parse_quantity(s, Dimension::volume, field);
}

} // namespace fndt1::units
