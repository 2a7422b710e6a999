#include "ionbath/ramsey.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ionbath/constants.hpp"
#include "ionbath/rng.hpp"

namespace ionbath {

void RamseySettings::validate() const {
    if (wait_time_s <= 0.0)
        throw std::domain_error("RamseySettings: wait time must be positive");
    if (baseline_contrast < 0.0 || baseline_contrast > 1.0)
        throw std::domain_error("RamseySettings: contrast outside [0,1]");
    if (extra_dephasing_per_tl < 0.0)
        throw std::domain_error("RamseySettings: negative dephasing rate");
}

double fringe_probability(double detuning_hz, double contrast,
                          const RamseySettings& settings) {
    settings.validate();
    if (contrast < 0.0 || contrast > 1.0)
        throw std::domain_error("fringe_probability: contrast outside [0,1]");
    return 0.5 + 0.5 * contrast *
                     std::cos(constants::two_pi * detuning_hz * settings.wait_time_s +
                              settings.phase_rad);
}

double contrast_decay(double t_over_tl, double c0, double t2_over_tl) {
    if (t2_over_tl <= 0.0) throw std::domain_error("contrast_decay: T2 must be positive");
    if (t_over_tl < 0.0) throw std::domain_error("contrast_decay: negative time");
    return c0 * std::exp(-t_over_tl / t2_over_tl);
}

double fractional_shift_bound(double resolution_hz, double hfs_energy_j) {
    if (resolution_hz < 0.0 || hfs_energy_j <= 0.0)
        throw std::domain_error("fractional_shift_bound: inputs must be nonnegative");
    return resolution_hz / (hfs_energy_j / constants::planck);
}

double absolute_shift_bound(double fractional, double hfs_energy_j) {
    if (fractional < 0.0 || hfs_energy_j <= 0.0)
        throw std::domain_error("absolute_shift_bound: inputs must be nonnegative");
    return fractional * (hfs_energy_j / constants::planck);
}

ContrastEstimate simulate_ramsey_mc(const RamseySettings& settings,
                                    double relaxation_rate_per_tl,
                                    double exposure_t_over_tl, std::size_t n_trajectories,
                                    std::uint64_t seed) {
    settings.validate();
    if (relaxation_rate_per_tl < 0.0)
        throw std::domain_error("simulate_ramsey_mc: negative relaxation rate");
    if (exposure_t_over_tl < 0.0)
        throw std::domain_error("simulate_ramsey_mc: negative exposure");
    if (n_trajectories < 1)
        throw std::domain_error("simulate_ramsey_mc: need at least one trajectory");

    const double total_rate = relaxation_rate_per_tl + settings.extra_dephasing_per_tl;
    std::size_t survivors = 0;
    for (std::size_t index = 0; index < n_trajectories; ++index) {
        Rng rng(derive_seed(seed, index));
        const bool survived =
            total_rate <= 0.0 || rng.exponential(total_rate) > exposure_t_over_tl;
        survivors += survived ? 1 : 0;
    }

    const double n = static_cast<double>(n_trajectories);
    ContrastEstimate out;
    out.survival_fraction = survivors / n;
    out.contrast = settings.baseline_contrast * out.survival_fraction;
    out.stderr_contrast = settings.baseline_contrast *
                          std::sqrt(out.survival_fraction * (1.0 - out.survival_fraction) / n);
    return out;
}

std::vector<FringeScanPoint> simulate_fringe_scan(
    const RamseySettings& settings, double relaxation_rate_per_tl,
    double exposure_t_over_tl, const std::vector<double>& detunings_hz,
    long trials_per_point, const DetectionModel& detection, std::uint64_t seed) {
    settings.validate();
    detection.validate();
    if (trials_per_point < 1)
        throw std::domain_error("simulate_fringe_scan: need at least one trial per point");

    const double total_rate = relaxation_rate_per_tl + settings.extra_dephasing_per_tl;
    const double survival = std::exp(-total_rate * exposure_t_over_tl);

    std::vector<FringeScanPoint> scan;
    scan.reserve(detunings_hz.size());
    for (std::size_t i = 0; i < detunings_hz.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        FringeScanPoint point;
        point.detuning_hz = detunings_hz[i];
        point.counts.n_trials = trials_per_point;
        for (long trial = 0; trial < trials_per_point; ++trial) {
            const bool coherent = rng.bernoulli(survival);
            const double contrast = coherent ? settings.baseline_contrast : 0.0;
            const double p_bright =
                fringe_probability(point.detuning_hz, contrast, settings);
            const double p_dark_true = 1.0 - p_bright;
            const double p_dark_observed = forward_model(p_dark_true, detection);
            point.counts.n_dark += rng.bernoulli(p_dark_observed) ? 1 : 0;
        }
        scan.push_back(point);
    }
    return scan;
}

std::string fringe_scan_to_csv(const std::vector<FringeScanPoint>& scan) {
    std::ostringstream out;
    out << "detuning_hz,n_trials,n_dark,p_dark,stderr\n";
    for (const auto& point : scan) {
        const double p = point.counts.dark_fraction();
        const double se = std::sqrt(p * (1.0 - p) / point.counts.n_trials);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%.12g,%ld,%ld,%.12g,%.12g\n",
                      point.detuning_hz, point.counts.n_trials, point.counts.n_dark, p, se);
        out << buf;
    }
    return out.str();
}

}  // namespace ionbath
