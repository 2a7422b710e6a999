#pragma once

// Ramsey interferometry on the hyperfine clock transition: fringe shape,
// collision-driven contrast decay, a Monte Carlo where any spin-changing
// collision destroys the coherence outright, and the clock-shift bound.

#include <cstdint>
#include <string>
#include <vector>

#include "ionbath/detection.hpp"

namespace ionbath {

struct RamseySettings {
    double wait_time_s = 27e-3;          // between the two pi/2 pulses
    double baseline_contrast = 0.55;     // fringe visibility without atoms
    double phase_rad = 0.0;
    double extra_dephasing_per_tl = 0.0;  // spin-changing rate of the lower branch

    void validate() const;
};

// P(bright) after the second pi/2 pulse: 1/2 + (C/2) cos(2 pi delta T + phi).
double fringe_probability(double detuning_hz, double contrast,
                          const RamseySettings& settings);

// C(t) = C0 exp(-t/T2), times in t_L.
double contrast_decay(double t_over_tl, double c0, double t2_over_tl);

// Absolute frequency resolution (Hz) <-> fractional bound against E_HFS/h.
double fractional_shift_bound(double resolution_hz, double hfs_energy_j);
double absolute_shift_bound(double fractional, double hfs_energy_j);

struct ContrastEstimate {
    double contrast = 0.0;
    double stderr_contrast = 0.0;
    double survival_fraction = 0.0;
};

// Coherence survives a trajectory iff no spin-changing collision happened
// during the exposure; contrast = C0 x survival fraction. The total
// spin-changing rate is the |1,0> relaxation rate plus the settings'
// extra dephasing channel, both per t_L.
ContrastEstimate simulate_ramsey_mc(const RamseySettings& settings,
                                    double relaxation_rate_per_tl,
                                    double exposure_t_over_tl, std::size_t n_trajectories,
                                    std::uint64_t seed);

struct FringeScanPoint {
    double detuning_hz = 0.0;
    CountRecord counts;
};

// Per-detuning Monte Carlo fringe scan: decohered trajectories respond
// flat at 1/2, surviving ones follow the fringe; dark counts are drawn
// through the detection model.
std::vector<FringeScanPoint> simulate_fringe_scan(
    const RamseySettings& settings, double relaxation_rate_per_tl,
    double exposure_t_over_tl, const std::vector<double>& detunings_hz,
    long trials_per_point, const DetectionModel& detection, std::uint64_t seed);

std::string fringe_scan_to_csv(const std::vector<FringeScanPoint>& scan);

}  // namespace ionbath
