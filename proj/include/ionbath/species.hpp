#pragma once

// Species descriptions for the ion qubit and the neutral-atom bath, plus
// the collision-pair parameters every rate formula consumes.

#include <stdexcept>
#include <string>

namespace ionbath {

// Hyperfine/Zeeman spin label with doubled quantum numbers so that the
// spin-1/2 Zeeman qubit (F=1/2) and integer-F hyperfine states share one
// representation.
struct SpinQuantum {
    int twice_f = 0;
    int twice_mf = 0;

    bool valid() const {
        return twice_f >= 0 && std::abs(twice_mf) <= twice_f &&
               (twice_f - twice_mf) % 2 == 0;
    }
    bool operator==(const SpinQuantum&) const = default;
};

std::string to_string(const SpinQuantum& s);

enum class QubitKind { zeeman_two_level, hyperfine_clock };

struct IonSpec {
    std::string isotope_label;
    double mass_u = 0.0;
    QubitKind qubit_kind = QubitKind::zeeman_two_level;
    double hyperfine_splitting_ghz = 0.0;  // E_i^HFS as h x GHz
    double hyperfine_splitting_j() const;
    double zeeman_splitting_mhz = 0.0;

    double mass_kg() const;
    void validate() const;
};

struct AtomSpec {
    std::string species_label;
    double mass_u = 0.0;
    SpinQuantum spin_state;
    int max_twice_f = 0;            // highest ground-manifold F (doubled)
    double density_per_m3 = 0.0;
    double hyperfine_splitting_ghz = 0.0;  // E_a^HFS as h x GHz
    double hyperfine_splitting_j() const;
    double polarizability_si = 0.0;      // C m^2/V; 0 = not provided

    double mass_kg() const;
    void validate() const;
};

struct PairParams {
    double mu_kg = 0.0;        // reduced mass
    double c4_jm4 = 0.0;       // polarization-potential coefficient
    double charge_c = 0.0;
    double collision_energy_j = 0.0;

    void validate(double atom_mass_kg, double ion_mass_kg) const;
    static PairParams from_species(const IonSpec& ion, const AtomSpec& atom);
};

// The C4 value calibrated so the Rb-Yb+ pair reproduces the measured
// Langevin rate constant; used whenever a configuration does not override
// C4 or supply a polarizability.
double calibrated_c4();

namespace presets {

IonSpec yb174();
IonSpec yb171();
AtomSpec rb87(const SpinQuantum& state, double density_per_m3 = 1e18);
SpinQuantum parse_spin_state(const std::string& text);   // "F,mF", halves allowed

}  // namespace presets

}  // namespace ionbath
