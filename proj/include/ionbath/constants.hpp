#pragma once

// Physical constants (CODATA 2018 / SI 2019 exact values) and unit
// conversions. Everything internal to the library is SI (J, kg, s, m);
// convenience units (u, mK, GHz, us) are converted at the boundary
// through the helpers below.

namespace ionbath::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

inline constexpr double planck = 6.62607015e-34;            // J s (exact)
inline constexpr double hbar = 1.054571817e-34;             // J s
inline constexpr double boltzmann = 1.380649e-23;           // J/K (exact)
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double elementary_charge = 1.602176634e-19;     // C (exact)
inline constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg

}  // namespace ionbath::constants

namespace ionbath::units {

inline constexpr double kg_from_u(double mass_u) {
    return mass_u * constants::atomic_mass_unit;
}

inline constexpr double u_from_kg(double mass_kg) {
    return mass_kg / constants::atomic_mass_unit;
}

// Thermal energy k_B * T for T given in millikelvin.
inline constexpr double joule_from_mk(double temperature_mk) {
    return constants::boltzmann * temperature_mk * 1e-3;
}

inline constexpr double mk_from_joule(double energy_j) {
    return energy_j / constants::boltzmann * 1e3;
}

// Photon/level-splitting energy h * nu for nu given in GHz.
inline constexpr double joule_from_h_ghz(double frequency_ghz) {
    return constants::planck * frequency_ghz * 1e9;
}

inline constexpr double h_ghz_from_joule(double energy_j) {
    return energy_j / constants::planck * 1e-9;
}

inline constexpr double seconds_from_us(double t_us) { return t_us * 1e-6; }
inline constexpr double us_from_seconds(double t_s) { return t_s * 1e6; }

inline constexpr double hz_from_mhz(double f_mhz) { return f_mhz * 1e6; }

}  // namespace ionbath::units
