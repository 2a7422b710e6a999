#pragma once

// State-readout model: bright/dark misclassification probabilities, the
// efficiency correction that deconvolves observed dark fractions into spin
// populations, and binomial (Wilson) uncertainty intervals.

#include <string>

namespace ionbath {

struct DetectionModel {
    double eta_dark_given_down = 1.0;  // P(dark | lower/dark-mapped state)
    double eta_dark_given_up = 0.0;    // P(dark | upper/bright-mapped state)
    double sigma_eta_down = 0.0;       // quoted 1-sigma uncertainties
    double sigma_eta_up = 0.0;

    // Invertibility needs eta_dark_down strictly above eta_dark_up.
    void validate() const;
    double contrast() const { return eta_dark_given_down - eta_dark_given_up; }
};

struct CountRecord {
    long n_trials = 0;
    long n_dark = 0;

    void validate() const;
    double dark_fraction() const { return static_cast<double>(n_dark) / n_trials; }
};

// p_dark = eta_down p_down + eta_up (1 - p_down).
double forward_model(double p_down, const DetectionModel& model);

struct CorrectedProbability {
    double value = 0.0;      // clamped to [0,1]
    double raw = 0.0;        // unclamped algebraic inverse
    bool out_of_range = false;
};

// p_down = (p_dark - eta_up) / (eta_down - eta_up), exact inverse of
// forward_model; the unclamped value is preserved for audits.
CorrectedProbability invert(double p_dark_observed, const DetectionModel& model);

struct Interval {
    double low = 0.0;
    double high = 0.0;
    double half_width() const { return (high - low) / 2.0; }
};

// Wilson score interval; z = 1 is the one-standard-deviation convention.
Interval wilson_interval(const CountRecord& rec, double z = 1.0);

// Wilson interval at a two-sided confidence level in (0,1).
Interval binomial_interval(const CountRecord& rec, double confidence);

// Normal quantile z with P(|Z| <= z) = confidence.
double z_for_confidence(double confidence);

struct CorrectedEstimate {
    double p_down = 0.0;
    double sigma = 0.0;
    bool out_of_range = false;
};

// First-order propagation through the correction: binomial counting error
// and the eta uncertainties combined in quadrature. One-sided eta
// uncertainties are treated as half-normal with the quoted magnitude.
CorrectedEstimate propagate_correction_error(const CountRecord& rec,
                                             const DetectionModel& model);

namespace detection_presets {

DetectionModel ideal();
DetectionModel yb174_f2_bath();   // Zeeman qubit, F=2 atoms
DetectionModel yb174_f1_bath();   // Zeeman qubit, F=1 atoms
DetectionModel yb171_hyperfine(); // clock qubit, F=0 vs F=1 readout
DetectionModel by_name(const std::string& name);

}  // namespace detection_presets

}  // namespace ionbath
