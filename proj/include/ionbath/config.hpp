#pragma once

// Run configuration: one JSON document with nested sections, validated
// strictly (unknown keys are errors, diagnostics carry the path to the
// offending field). Presets for the two isotopes, the four bath states
// and the detection tables ship as named profiles.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ionbath/collision_mc.hpp"
#include "ionbath/detection.hpp"
#include "ionbath/ramsey.hpp"
#include "ionbath/species.hpp"

namespace ionbath {

class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& path, const std::string& message)
        : std::runtime_error(path + ": " + message) {}
};

struct TimeGridSpec {
    double t_max_tl = 12.0;
    int n_points = 40;
    std::string spacing = "linear";  // or "log"

    std::vector<double> times_tl() const;
};

struct BranchingSpec {
    double p_se = 0.0872;   // exchange probability per collision and channel
    double p_sr = 0.1564;   // relaxation probability per collision
    std::optional<double> epsilon;  // unset = 1 for F=2 baths, 0 for F=1
    double energy_floor_mk = 20.0;
    double initial_energy_mk = 20.0;
    std::string initial_state = "up";
};

struct RamseySpec {
    double wait_time_ms = 27.0;
    double baseline_contrast = 0.55;
    double phase_rad = 0.0;
    double extra_dephasing_per_tl = 0.0;
    double relaxation_rate_per_tl = 1.0 / 1.4;
    std::vector<double> exposures_t_over_tl = {0.0, 0.25, 0.5, 0.75, 1.0,
                                               1.5, 2.0,  2.5, 3.0,  4.0};
    double fringe_exposure_t_over_tl = 0.5;
    double fringe_detuning_min_hz = -80.0;
    double fringe_detuning_max_hz = 80.0;
    int fringe_n_points = 33;
    long fringe_trials_per_point = 500;

    RamseySettings settings() const;
};

enum class KineticsModel { two_level, four_level };

struct RunConfig {
    IonSpec ion;
    AtomSpec bath;
    double c4_jm4 = 0.0;  // 0 = calibrated default
    double collision_energy_mk = 100.0;
    KineticsModel model = KineticsModel::two_level;
    BranchingSpec branching;
    FourLevelRates four_level_rates{0.4, 0.4, 0.3, 0.3, 0.25, 0.05};
    std::string detection_preset = "yb171_hyperfine";
    DetectionModel detection;
    std::uint64_t seed = 20120601;
    std::size_t ensemble_size = 10000;
    TimeGridSpec time_grid;
    RamseySpec ramsey;
    double density_systematic_fraction = 0.40;

    static RunConfig defaults();
    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);

    // Canonical dump: every field explicit, keys sorted. Runtime knobs
    // (worker count, output paths) are deliberately not part of the
    // document, so the hash is stable across them.
    std::string to_json_text() const;
    std::string config_hash() const;

    void validate() const;

    // Assembled physics objects.
    PairParams pair() const;
    double gamma_langevin_per_s() const;
    double langevin_time_s() const;
    double epsilon_effective() const;
    ChannelRuleSet rule_set() const;       // two-level qubit states vs bath
    BranchingConfig branching_config() const;
    TrajectoryState initial_trajectory_state() const;
};

}  // namespace ionbath
