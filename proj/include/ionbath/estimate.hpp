#pragma once

// Inverse problems: weighted nonlinear least squares (damped Gauss-Newton)
// for relaxation curves, Ramsey fringe scans and contrast decays, the
// uncertainty propagation into the spin-exchange/spin-relaxation
// decomposition, and bootstrap validation of the covariance errors.
//
// Relaxation fits run in observed space: the detection forward model maps
// the population curve onto predicted dark fractions and the raw counts
// are never corrected before fitting. Weights are the per-point binomial
// variance evaluated at the model prediction, recomputed as the fit
// converges.

#include <cstdint>
#include <eigen3/Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ionbath/detection.hpp"
#include "ionbath/rate_model.hpp"
#include "ionbath/ramsey.hpp"

namespace ionbath {

struct MeasurementPoint {
    double t_over_tl = 0.0;
    CountRecord counts;
};

struct MeasurementSet {
    std::vector<MeasurementPoint> records;
    std::string ion_label;
    std::string bath_label;
    std::string detection_preset = "ideal";
    // Four-level bookkeeping: which state was prepared and which state's
    // population the dark fraction tracks (after an optional swap pulse).
    std::string prepared_state;
    std::string observable_state;

    void validate() const;  // times >= 0, strictly sorted, trials > 0
    static MeasurementSet from_csv(const std::string& text);
    std::string to_csv() const;
};

struct DerivedQuantity {
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

struct FitResult {
    std::string model;
    std::vector<std::string> parameter_names;
    Eigen::VectorXd parameters;
    Eigen::MatrixXd covariance;
    double reduced_chi_square = 0.0;
    Eigen::VectorXd weighted_residuals;
    int n_iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
    std::vector<double> accepted_objectives;   // chi^2 after each accepted step
    std::vector<DerivedQuantity> derived;      // e.g. fringe period, center shift

    double value(const std::string& name) const;
    double sigma(const std::string& name) const;
    std::string to_json() const;
};

// Non-convergence carries the last iterate for diagnostics.
class FitNonConvergence : public std::runtime_error {
  public:
    FitNonConvergence(const std::string& what, FitResult last_iterate)
        : std::runtime_error(what), last(std::move(last_iterate)) {}
    FitResult last;
};

// Singular Jacobian; `combination` spells out the unidentifiable
// parameter direction.
class FitDegeneracy : public std::runtime_error {
  public:
    FitDegeneracy(const std::string& what, std::string combination_)
        : std::runtime_error(what), combination(std::move(combination_)) {}
    std::string combination;
};

enum class RelaxationModel { two_level, four_level };

struct FitOptions {
    int max_iterations = 200;
    double rel_change_tol = 1e-10;
};

// Two-level: parameters (T1_tL, p_up0, p_up_inf) of the bright-state
// population; four-level: the six generator rates, fitted jointly over
// one or more labeled measurement sets.
FitResult fit_relaxation(const MeasurementSet& data, RelaxationModel model,
                         const DetectionModel& detection);
FitResult fit_relaxation_four_level(const std::vector<MeasurementSet>& data,
                                    const DetectionModel& detection);

// Fraction-level two-level fit (exact inputs, no counting noise); the
// count-based path wraps this with fractions = n_dark/n_trials.
FitResult fit_two_level_fractions(const std::vector<double>& times_tl,
                                  const std::vector<double>& dark_fractions,
                                  const std::vector<double>& trials,
                                  const DetectionModel& detection,
                                  const FitOptions& options = {});

// Fringe model in observed space: parameters (contrast, phase_rad,
// effective_wait_s). Reports the fitted fringe period and the implied
// center-frequency shift with propagated uncertainty.
FitResult fit_fringe(const std::vector<FringeScanPoint>& scan,
                     const DetectionModel& detection);

// Fraction-level fringe fit (exact inputs, no counting noise).
FitResult fit_fringe_fractions(const std::vector<double>& detunings_hz,
                               const std::vector<double>& dark_fractions,
                               const std::vector<double>& trials,
                               const DetectionModel& detection);

struct ContrastPoint {
    double t_over_tl = 0.0;
    double contrast = 0.0;
    double sigma = 0.0;  // 0 = unweighted
};

FitResult fit_contrast_decay(const std::vector<ContrastPoint>& points);
FitResult fit_contrast_decay_fixed_c0(const std::vector<ContrastPoint>& points, double c0);

struct DecomposedRates {
    TwoLevelRates rates;            // per t_L
    double sigma_down_se = 0.0;
    double sigma_sr = 0.0;
    double down_se_times_t1 = 0.0;  // dimensionless, as usually quoted
    double sr_times_t1 = 0.0;
    double sigma_down_se_times_t1 = 0.0;
    double sigma_sr_times_t1 = 0.0;
};

// decompose_rates plus first-order error propagation including the
// T1-p_inf covariance term.
DecomposedRates derive_rate_decomposition(const FitResult& fit, bool stretched_bath);

struct BootstrapSummary {
    std::vector<std::string> parameter_names;
    Eigen::MatrixXd samples;        // one row per successful resample
    Eigen::VectorXd sigma;          // sample standard deviation
    Eigen::VectorXd percentile_16;
    Eigen::VectorXd percentile_50;
    Eigen::VectorXd percentile_84;
    int n_failures = 0;
};

// Per-record binomial resampling of the counts; deterministic under seed.
// Throws if more than 20% of the resampled fits fail.
BootstrapSummary bootstrap(const MeasurementSet& data,
                           const std::function<FitResult(const MeasurementSet&)>& fitter,
                           int n_resamples, std::uint64_t seed);

// --- CSV helpers for the fitting interfaces --------------------------------

std::vector<FringeScanPoint> fringe_scan_from_csv(const std::string& text);
std::vector<ContrastPoint> contrast_points_from_csv(const std::string& text);
std::string contrast_points_to_csv(const std::vector<ContrastPoint>& points);

}  // namespace ionbath
