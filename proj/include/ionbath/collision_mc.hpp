#pragma once

// Stochastic per-collision trajectories of the ion: spin label and kinetic
// energy are updated together at Poisson-distributed Langevin collision
// events. Elastic momentum transfer removes on average the fraction
// kappa = 2 m_a m_i/(m_a+m_i)^2 of the kinetic energy per collision; an
// atomic hyperfine flip (probability epsilon per collision) deposits
// E_a^HFS m_a/(m_a+m_i). Spin branching is sampled per collision from
// per-channel probabilities; the hyperfine flip is sampled independently
// of the spin outcome.

#include <cstdint>
#include <string>
#include <vector>

#include "ionbath/constants.hpp"
#include "ionbath/rate_model.hpp"
#include "ionbath/rng.hpp"

namespace ionbath {

struct TrajectoryState {
    int spin = 0;                // index into BranchingConfig labels
    double kinetic_energy_j = 0.0;
    double time_s = 0.0;
    long collision_count = 0;
};

struct CollisionChannel {
    int from = 0;
    int to = 0;
    double probability = 0.0;  // per Langevin collision
    RateKind kind = RateKind::spin_relaxation;
};

// Elastic energy update per collision: the default applies the average
// fractional loss kappa; the sampled mode draws an isotropic
// center-of-mass scattering angle instead (loss kappa (1 - cos theta),
// same mean, realistic spread).
enum class EnergyUpdateMode { mean_loss, sampled_angle };

struct BranchingConfig {
    std::vector<std::string> state_labels;
    std::vector<CollisionChannel> channels;
    double epsilon = 0.0;                 // atomic hyperfine flip probability
    double energy_floor_j = units::joule_from_mk(20.0);
    double gamma_langevin_per_s = 0.0;
    double atom_mass_kg = 0.0;
    double ion_mass_kg = 0.0;
    double atom_hfs_energy_j = 0.0;
    EnergyUpdateMode energy_update = EnergyUpdateMode::mean_loss;

    int n_states() const { return static_cast<int>(state_labels.size()); }
    double cooling_fraction() const;       // kappa
    double heating_quantum_j() const;      // E_a^HFS m_a/(m_a+m_i)

    // Per-channel probabilities in [0,1], per-state sums <= 1, positive
    // Langevin rate, masses set. Throws std::invalid_argument otherwise.
    void validate() const;

    // Induced master-equation generator: rate per channel = gamma_L x
    // branching probability. Time unit of the result is t_L.
    RateMatrix induced_rate_matrix() const;

    // Two-level config (labels {up, down}) from per-t_L out-rates. SE
    // entries are checked against the rule set so that a forbidden
    // exchange channel can never be sampled.
    static BranchingConfig two_level(const TwoLevelRates& rates_per_tl,
                                     const ChannelRuleSet& rules,
                                     double gamma_langevin_per_s);

    // General config from a rate matrix in t_L units.
    static BranchingConfig from_rate_matrix(const RateMatrix& matrix,
                                            double gamma_langevin_per_s);
};

TrajectoryState step_collision(const TrajectoryState& state, const BranchingConfig& cfg,
                               Rng& rng);

// Collision events with time < horizon, initial state included.
std::vector<TrajectoryState> run_trajectory(const TrajectoryState& init,
                                            const BranchingConfig& cfg,
                                            double horizon_s, Rng& rng);

struct EnsembleStats {
    std::vector<double> grid_s;             // sample times
    std::vector<std::string> labels;
    std::vector<std::vector<double>> populations;  // [state][grid]
    std::vector<std::vector<double>> population_stderr;
    std::vector<double> mean_energy_j;
    std::vector<double> energy_stderr_j;
    std::size_t n_trajectories = 0;
    std::uint64_t base_seed = 0;
    double gamma_langevin_per_s = 0.0;

    std::string to_csv() const;   // t_over_tL, p_*, mean_Ekin_mK, stderr_*
    std::string to_json() const;
};

// N independent trajectories on per-index derived seeds, reduced on a
// fixed time grid. Identical results for any worker count.
EnsembleStats run_ensemble(const TrajectoryState& init, const BranchingConfig& cfg,
                           const std::vector<double>& grid_s, std::size_t n_trajectories,
                           std::uint64_t base_seed, int n_workers = 1);

// Stationary mean kinetic energy fed by hyperfine flips and drained by
// elastic cooling: epsilon E_a^HFS (m_a+m_i)/(2 m_i).
double steady_energy_analytic(double epsilon, double atom_mass_kg, double ion_mass_kg,
                              double atom_hfs_energy_j);

// Mean-energy relaxation toward the stationary value, exact for the
// per-collision mean update when the floor is inactive.
double mean_energy_solution(double e0_j, double epsilon, double atom_mass_kg,
                            double ion_mass_kg, double atom_hfs_energy_j,
                            double gamma_langevin_per_s, double t_s);

// Spin temperature assigned to a stationary hyperfine population via
// p1/p0 = 3 exp(-E_HFS / k_B T_s); p1 >= 3/4 has no finite solution.
double spin_temperature(double p1, double ion_hfs_energy_j);

}  // namespace ionbath
