#include "ionbath/detection.hpp"

#include <cmath>
#include <stdexcept>

namespace ionbath {

void DetectionModel::validate() const {
    if (eta_dark_given_down < 0.0 || eta_dark_given_down > 1.0 ||
        eta_dark_given_up < 0.0 || eta_dark_given_up > 1.0)
        throw std::domain_error("DetectionModel: efficiencies outside [0,1]");
    if (!(eta_dark_given_up < eta_dark_given_down))
        throw std::domain_error(
            "DetectionModel: eta_dark_down must exceed eta_dark_up for the "
            "correction to be invertible");
    if (sigma_eta_down < 0.0 || sigma_eta_up < 0.0)
        throw std::domain_error("DetectionModel: negative eta uncertainty");
}

void CountRecord::validate() const {
    if (n_trials < 1) throw std::domain_error("CountRecord: need at least one trial");
    if (n_dark < 0 || n_dark > n_trials)
        throw std::domain_error("CountRecord: dark count outside [0, n_trials]");
}

double forward_model(double p_down, const DetectionModel& model) {
    model.validate();
    if (p_down < 0.0 || p_down > 1.0)
        throw std::domain_error("forward_model: p_down outside [0,1]");
    return model.eta_dark_given_down * p_down +
           model.eta_dark_given_up * (1.0 - p_down);
}

CorrectedProbability invert(double p_dark_observed, const DetectionModel& model) {
    model.validate();
    CorrectedProbability out;
    out.raw = (p_dark_observed - model.eta_dark_given_up) / model.contrast();
    out.out_of_range = out.raw < 0.0 || out.raw > 1.0;
    out.value = std::min(1.0, std::max(0.0, out.raw));
    return out;
}

Interval wilson_interval(const CountRecord& rec, double z) {
    rec.validate();
    if (z <= 0.0) throw std::domain_error("wilson_interval: z must be positive");
    const double n = static_cast<double>(rec.n_trials);
    const double p = rec.dark_fraction();
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Interval binomial_interval(const CountRecord& rec, double confidence) {
    return wilson_interval(rec, z_for_confidence(confidence));
}

double z_for_confidence(double confidence) {
    if (confidence <= 0.0 || confidence >= 1.0)
        throw std::domain_error("z_for_confidence: confidence must lie in (0,1)");
    // Acklam's rational approximation of the normal quantile, refined with
    // one Halley step; good to ~1e-12 over the whole range.
    const double p = 0.5 * (1.0 + confidence);
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against the complementary error function.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) *
                     std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

CorrectedEstimate propagate_correction_error(const CountRecord& rec,
                                             const DetectionModel& model) {
    model.validate();
    rec.validate();
    const double n = static_cast<double>(rec.n_trials);
    const double p_obs = rec.dark_fraction();
    const double contrast = model.contrast();

    const CorrectedProbability corrected = invert(p_obs, model);

    // Binomial variance of the observed fraction; half a count of
    // regularization keeps the error finite at k = 0 or k = n.
    const double p_reg = (rec.n_dark + 0.5) / (n + 1.0);
    const double var_obs = p_reg * (1.0 - p_reg) / n;

    const double d_obs = 1.0 / contrast;
    const double d_eta_up = (p_obs - model.eta_dark_given_down) / (contrast * contrast);
    const double d_eta_down = -(p_obs - model.eta_dark_given_up) / (contrast * contrast);

    const double var = d_obs * d_obs * var_obs +
                       d_eta_up * d_eta_up * model.sigma_eta_up * model.sigma_eta_up +
                       d_eta_down * d_eta_down * model.sigma_eta_down * model.sigma_eta_down;

    CorrectedEstimate out;
    out.p_down = corrected.value;
    out.out_of_range = corrected.out_of_range;
    out.sigma = std::sqrt(var);
    return out;
}

namespace detection_presets {

DetectionModel ideal() { return {1.0, 0.0, 0.0, 0.0}; }

DetectionModel yb174_f2_bath() { return {0.81, 0.03, 0.01, 0.01}; }

DetectionModel yb174_f1_bath() { return {0.90, 0.00, 0.01, 0.01}; }

DetectionModel yb171_hyperfine() { return {0.98, 0.07, 0.01, 0.03}; }

DetectionModel by_name(const std::string& name) {
    if (name == "ideal") return ideal();
    if (name == "yb174_f2_bath") return yb174_f2_bath();
    if (name == "yb174_f1_bath") return yb174_f1_bath();
    if (name == "yb171_hyperfine") return yb171_hyperfine();
    throw std::invalid_argument("unknown detection preset: " + name);
}

}  // namespace detection_presets

}  // namespace ionbath
