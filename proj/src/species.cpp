#include "ionbath/species.hpp"

#include <cstdlib>

#include "ionbath/collision_rates.hpp"
#include "ionbath/constants.hpp"

namespace ionbath {

std::string to_string(const SpinQuantum& s) {
    auto half = [](int twice) {
        if (twice % 2 == 0) return std::to_string(twice / 2);
        return std::to_string(twice) + "/2";
    };
    return half(s.twice_f) + "," + half(s.twice_mf);
}

double IonSpec::mass_kg() const { return units::kg_from_u(mass_u); }

double IonSpec::hyperfine_splitting_j() const {
    return units::joule_from_h_ghz(hyperfine_splitting_ghz);
}

void IonSpec::validate() const {
    if (mass_u <= 0.0) throw std::domain_error("ion mass must be positive");
    if (hyperfine_splitting_ghz < 0.0)
        throw std::domain_error("ion hyperfine splitting must be nonnegative");
    if (zeeman_splitting_mhz < 0.0)
        throw std::domain_error("ion Zeeman splitting must be nonnegative");
}

double AtomSpec::mass_kg() const { return units::kg_from_u(mass_u); }

double AtomSpec::hyperfine_splitting_j() const {
    return units::joule_from_h_ghz(hyperfine_splitting_ghz);
}

void AtomSpec::validate() const {
    if (mass_u <= 0.0) throw std::domain_error("atom mass must be positive");
    if (density_per_m3 < 0.0) throw std::domain_error("atom density must be nonnegative");
    if (!spin_state.valid())
        throw std::domain_error("atom spin state has |m_F| > F or mismatched parity");
    if (spin_state.twice_f > max_twice_f)
        throw std::domain_error("atom spin state lies above the highest ground manifold");
    if (hyperfine_splitting_ghz < 0.0)
        throw std::domain_error("atom hyperfine splitting must be nonnegative");
}

void PairParams::validate(double atom_mass_kg, double ion_mass_kg) const {
    if (mu_kg <= 0.0) throw std::domain_error("reduced mass must be positive");
    if (c4_jm4 <= 0.0) throw std::domain_error("C4 must be positive");
    const double min_mass = std::min(atom_mass_kg, ion_mass_kg);
    if (mu_kg >= min_mass)
        throw std::domain_error("reduced mass must be below the lighter partner");
}

PairParams PairParams::from_species(const IonSpec& ion, const AtomSpec& atom) {
    PairParams pair;
    pair.mu_kg = reduced_mass(atom.mass_kg(), ion.mass_kg());
    pair.charge_c = constants::elementary_charge;
    pair.c4_jm4 = atom.polarizability_si > 0.0
                      ? c4_from_polarizability(atom.polarizability_si, pair.charge_c)
                      : calibrated_c4();
    pair.collision_energy_j = units::joule_from_mk(100.0);
    pair.validate(atom.mass_kg(), ion.mass_kg());
    return pair;
}

double calibrated_c4() {
    // Calibration: measured rate constant 2.1e-15 m^3/s for the Rb-Yb+ pair
    // (reduced mass 57.615 u), inverted through the Langevin formula.
    static const double value =
        c4_from_langevin(2.1e-15, units::kg_from_u(57.615));
    return value;
}

namespace presets {

IonSpec yb174() {
    IonSpec ion;
    ion.isotope_label = "174Yb+";
    ion.mass_u = 173.9388664;
    ion.qubit_kind = QubitKind::zeeman_two_level;
    ion.hyperfine_splitting_ghz = 0.0;
    ion.zeeman_splitting_mhz = 37.5;
    return ion;
}

IonSpec yb171() {
    IonSpec ion;
    ion.isotope_label = "171Yb+";
    ion.mass_u = 170.9363302;
    ion.qubit_kind = QubitKind::hyperfine_clock;
    ion.hyperfine_splitting_ghz = 12.6;
    ion.zeeman_splitting_mhz = 0.0;
    return ion;
}

AtomSpec rb87(const SpinQuantum& state, double density_per_m3) {
    AtomSpec atom;
    atom.species_label = "87Rb";
    atom.mass_u = 86.9091805;
    atom.spin_state = state;
    atom.max_twice_f = 4;  // ground-state manifolds F = 1, 2
    atom.density_per_m3 = density_per_m3;
    atom.hyperfine_splitting_ghz = 6.8;
    atom.validate();
    return atom;
}

SpinQuantum parse_spin_state(const std::string& text) {
    // Accepts "F,mF" with integer or n/2 tokens, e.g. "2,2" or "1/2,-1/2".
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw std::domain_error("spin state must be written as F,mF: " + text);
    auto parse_half = [&](const std::string& tok) {
        const auto slash = tok.find('/');
        try {
            if (slash == std::string::npos) return 2 * std::stoi(tok);
            if (tok.substr(slash + 1) != "2")
                throw std::invalid_argument(tok);
            return std::stoi(tok.substr(0, slash));
        } catch (const std::exception&) {
            throw std::domain_error("bad spin quantum number: " + tok);
        }
    };
    SpinQuantum s{parse_half(text.substr(0, comma)), parse_half(text.substr(comma + 1))};
    if (!s.valid()) throw std::domain_error("invalid spin state: " + text);
    return s;
}

}  // namespace presets

}  // namespace ionbath
