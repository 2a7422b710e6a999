#pragma once

// Ion-atom collision-rate formulas. Capture collisions in the -C4/2r^4
// polarization potential happen at the energy-independent Langevin rate
//     gamma_L = 2 pi sqrt(C4/mu) n_a,
// while the total rate (including quantum forward scattering) is
//     gamma_c = n_a sqrt(2) pi (1 + pi^2/16) (C4/hbar)^(2/3) (E/mu)^(1/6).
// All quantities SI.

#include <cmath>
#include <stdexcept>

#include "ionbath/constants.hpp"

namespace ionbath {

inline double reduced_mass(double mass_a_kg, double mass_i_kg) {
    if (mass_a_kg <= 0.0 || mass_i_kg <= 0.0)
        throw std::domain_error("reduced_mass: masses must be positive");
    return mass_a_kg * mass_i_kg / (mass_a_kg + mass_i_kg);
}

// C4 = alpha0 q^2 / (4 pi eps0)^2
inline double c4_from_polarizability(double alpha0_si, double charge_c) {
    if (alpha0_si <= 0.0)
        throw std::domain_error("c4_from_polarizability: alpha0 must be positive");
    const double denom = 4.0 * constants::pi * constants::vacuum_permittivity;
    return alpha0_si * charge_c * charge_c / (denom * denom);
}

// Inverse of the Langevin-rate formula: C4 = mu (gamma_L / (2 pi n_a))^2.
inline double c4_from_langevin(double gamma_l_over_n_m3s, double mu_kg) {
    if (gamma_l_over_n_m3s <= 0.0 || mu_kg <= 0.0)
        throw std::domain_error("c4_from_langevin: inputs must be positive");
    const double s = gamma_l_over_n_m3s / constants::two_pi;
    return mu_kg * s * s;
}

inline double langevin_rate(double c4_jm4, double mu_kg, double density_per_m3) {
    if (c4_jm4 <= 0.0 || mu_kg <= 0.0)
        throw std::domain_error("langevin_rate: C4 and mu must be positive");
    if (density_per_m3 < 0.0)
        throw std::domain_error("langevin_rate: density must be nonnegative");
    return constants::two_pi * std::sqrt(c4_jm4 / mu_kg) * density_per_m3;
}

inline double total_collision_rate(double c4_jm4, double mu_kg,
                                   double collision_energy_j,
                                   double density_per_m3) {
    if (c4_jm4 <= 0.0 || mu_kg <= 0.0)
        throw std::domain_error("total_collision_rate: C4 and mu must be positive");
    if (collision_energy_j <= 0.0)
        throw std::domain_error("total_collision_rate: collision energy must be positive");
    if (density_per_m3 < 0.0)
        throw std::domain_error("total_collision_rate: density must be nonnegative");
    const double prefactor =
        std::sqrt(2.0) * constants::pi * (1.0 + constants::pi * constants::pi / 16.0);
    return density_per_m3 * prefactor *
           std::pow(c4_jm4 / constants::hbar, 2.0 / 3.0) *
           std::pow(collision_energy_j / mu_kg, 1.0 / 6.0);
}

// Langevin time t_L = 1/gamma_L, the natural clock of the kinetics.
inline double langevin_time(double c4_jm4, double mu_kg, double density_per_m3) {
    const double rate = langevin_rate(c4_jm4, mu_kg, density_per_m3);
    if (rate <= 0.0)
        throw std::domain_error("langevin_time: rate is zero at this density");
    return 1.0 / rate;
}

}  // namespace ionbath
