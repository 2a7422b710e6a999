#include "ionbath/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "ionbath/constants.hpp"
#include "ionbath/rng.hpp"

namespace ionbath {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// --- Small CSV machinery ----------------------------------------------------

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    return fields;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (table.header.empty())
            table.header = split_line(line);
        else
            table.rows.push_back(split_line(line));
    }
    if (table.header.empty()) throw std::runtime_error("CSV: no header line");
    return table;
}

std::size_t column_index(const CsvTable& table, const std::string& name) {
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == name) return i;
    throw std::runtime_error("CSV: required column '" + name + "' missing");
}

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::runtime_error("CSV: bad number '" + s + "'");
    return v;
}

long parse_long(const std::string& s) {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::runtime_error("CSV: bad integer '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

void MeasurementSet::validate() const {
    if (records.empty()) throw std::domain_error("MeasurementSet: no records");
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].t_over_tl < 0.0)
            throw std::domain_error("MeasurementSet: negative time");
        records[i].counts.validate();
        if (i > 0 && !(records[i - 1].t_over_tl < records[i].t_over_tl))
            throw std::domain_error("MeasurementSet: times must be strictly increasing");
    }
}

MeasurementSet MeasurementSet::from_csv(const std::string& text) {
    const CsvTable table = parse_csv(text);
    const std::size_t ct = column_index(table, "t_over_tL");
    const std::size_t cn = column_index(table, "n_trials");
    const std::size_t ck = column_index(table, "n_dark");
    MeasurementSet set;
    for (const auto& row : table.rows) {
        MeasurementPoint point;
        point.t_over_tl = parse_double(row.at(ct));
        point.counts.n_trials = parse_long(row.at(cn));
        point.counts.n_dark = parse_long(row.at(ck));
        set.records.push_back(point);
    }
    std::sort(set.records.begin(), set.records.end(),
              [](const auto& a, const auto& b) { return a.t_over_tl < b.t_over_tl; });
    set.validate();
    return set;
}

std::string MeasurementSet::to_csv() const {
    std::ostringstream out;
    out << "t_over_tL,n_trials,n_dark\n";
    for (const auto& r : records)
        out << format_double(r.t_over_tl) << ',' << r.counts.n_trials << ','
            << r.counts.n_dark << '\n';
    return out.str();
}

std::vector<FringeScanPoint> fringe_scan_from_csv(const std::string& text) {
    const CsvTable table = parse_csv(text);
    const std::size_t cd = column_index(table, "detuning_hz");
    const std::size_t cn = column_index(table, "n_trials");
    const std::size_t ck = column_index(table, "n_dark");
    std::vector<FringeScanPoint> scan;
    for (const auto& row : table.rows) {
        FringeScanPoint point;
        point.detuning_hz = parse_double(row.at(cd));
        point.counts.n_trials = parse_long(row.at(cn));
        point.counts.n_dark = parse_long(row.at(ck));
        point.counts.validate();
        scan.push_back(point);
    }
    return scan;
}

std::vector<ContrastPoint> contrast_points_from_csv(const std::string& text) {
    const CsvTable table = parse_csv(text);
    const std::size_t ct = column_index(table, "t_over_tL");
    const std::size_t cc = column_index(table, "contrast");
    const std::size_t cs = column_index(table, "sigma");
    std::vector<ContrastPoint> points;
    for (const auto& row : table.rows)
        points.push_back({parse_double(row.at(ct)), parse_double(row.at(cc)),
                          parse_double(row.at(cs))});
    return points;
}

std::string contrast_points_to_csv(const std::vector<ContrastPoint>& points) {
    std::ostringstream out;
    out << "t_over_tL,contrast,sigma\n";
    for (const auto& p : points)
        out << format_double(p.t_over_tl) << ',' << format_double(p.contrast) << ','
            << format_double(p.sigma) << '\n';
    return out.str();
}

// --- FitResult ----------------------------------------------------------------

double FitResult::value(const std::string& name) const {
    for (std::size_t i = 0; i < parameter_names.size(); ++i)
        if (parameter_names[i] == name) return parameters(static_cast<int>(i));
    for (const auto& d : derived)
        if (d.name == name) return d.value;
    throw std::out_of_range("FitResult: no parameter " + name);
}

double FitResult::sigma(const std::string& name) const {
    for (std::size_t i = 0; i < parameter_names.size(); ++i)
        if (parameter_names[i] == name)
            return std::sqrt(std::max(0.0, covariance(static_cast<int>(i),
                                                      static_cast<int>(i))));
    for (const auto& d : derived)
        if (d.name == name) return d.sigma;
    throw std::out_of_range("FitResult: no parameter " + name);
}

std::string FitResult::to_json() const {
    nlohmann::json doc;
    doc["model"] = model;
    doc["converged"] = converged;
    doc["n_iterations"] = n_iterations;
    doc["reduced_chi_square"] = reduced_chi_square;
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < parameter_names.size(); ++i) {
        params.push_back({{"name", parameter_names[i]},
                          {"value", parameters(static_cast<int>(i))},
                          {"sigma", std::sqrt(std::max(
                                        0.0, covariance(static_cast<int>(i),
                                                        static_cast<int>(i))))}});
    }
    doc["parameters"] = params;
    nlohmann::json cov = nlohmann::json::array();
    for (int i = 0; i < covariance.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < covariance.cols(); ++j) row.push_back(covariance(i, j));
        cov.push_back(row);
    }
    doc["covariance"] = cov;
    nlohmann::json res = nlohmann::json::array();
    for (int i = 0; i < weighted_residuals.size(); ++i)
        res.push_back(weighted_residuals(i));
    doc["weighted_residuals"] = res;
    doc["warnings"] = warnings;
    if (!derived.empty()) {
        nlohmann::json der = nlohmann::json::object();
        for (const auto& d : derived)
            der[d.name] = {{"value", d.value}, {"sigma", d.sigma}};
        doc["derived"] = der;
    }
    return doc.dump(2);
}

// --- Damped least-squares engine ------------------------------------------------

namespace {

struct LmProblem {
    VectorXd y;
    std::function<void(const VectorXd&, VectorXd&)> eval;
    std::function<void(const VectorXd&, MatrixXd&)> jacobian;  // null -> central FD
    std::function<void(const VectorXd&, VectorXd&)> weights;   // null -> unit weights
    std::function<void(VectorXd&)> project;                    // null -> unbounded
    std::string model_name;
    std::vector<std::string> parameter_names;
    int max_iterations = 200;
    double rel_change_tol = 1e-10;
    // When the data can push the model into an unidentifiable limit that
    // must still be reported (with a warning) rather than rejected, the
    // covariance falls back to a pseudo-inverse.
    bool allow_degenerate = false;
};

double chi_square(const VectorXd& y, const VectorXd& yhat, const VectorXd& w) {
    double sum = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        const double r = y(i) - yhat(i);
        sum += w(i) * r * r;
    }
    return sum;
}

void numeric_jacobian(const LmProblem& prob, const VectorXd& theta, MatrixXd& jac) {
    const int n = static_cast<int>(prob.y.size());
    const int p = static_cast<int>(theta.size());
    jac.resize(n, p);
    VectorXd plus(n), minus(n);
    for (int j = 0; j < p; ++j) {
        const double h = 1e-6 * std::max(std::abs(theta(j)), 1.0);
        VectorXd tp = theta, tm = theta;
        tp(j) += h;
        tm(j) -= h;
        prob.eval(tp, plus);
        prob.eval(tm, minus);
        jac.col(j) = (plus - minus) / (2.0 * h);
    }
}

std::string describe_combination(const std::vector<std::string>& names,
                                 const VectorXd& direction) {
    std::ostringstream out;
    bool first = true;
    for (int i = 0; i < direction.size(); ++i) {
        if (std::abs(direction(i)) < 0.05) continue;
        if (!first) out << (direction(i) >= 0 ? " + " : " - ");
        else if (direction(i) < 0) out << "-";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f*", std::abs(direction(i)));
        out << buf << names[static_cast<std::size_t>(i)];
        first = false;
    }
    return out.str();
}

FitResult levenberg_marquardt(const LmProblem& prob, VectorXd theta) {
    const int n = static_cast<int>(prob.y.size());
    const int p = static_cast<int>(theta.size());
    if (n < p)
        throw std::invalid_argument(prob.model_name + ": fewer points than parameters");

    auto project = [&](VectorXd& t) {
        if (prob.project) prob.project(t);
    };
    project(theta);

    VectorXd yhat(n), w = VectorXd::Ones(n);
    prob.eval(theta, yhat);
    if (prob.weights) prob.weights(yhat, w);
    double chi2 = chi_square(prob.y, yhat, w);

    FitResult result;
    result.model = prob.model_name;
    result.parameter_names = prob.parameter_names;

    MatrixXd jac(n, p);
    double lambda = 1e-3;
    bool converged = false;
    // The loop runs the damped least-squares steps under fixed weights and
    // refreshes the weights only once an inner fixed point is reached; the
    // fit has converged when the first step after a reweight no longer
    // moves the parameters.
    bool weights_fresh = false;
    int iter = 0;

    auto fill_jacobian = [&](const VectorXd& t) {
        if (prob.jacobian)
            prob.jacobian(t, jac);
        else
            numeric_jacobian(prob, t, jac);
    };

    for (iter = 0; iter < prob.max_iterations && !converged; ++iter) {
        fill_jacobian(theta);
        MatrixXd jtwj = MatrixXd::Zero(p, p);
        VectorXd jtwr = VectorXd::Zero(p);
        for (int i = 0; i < n; ++i) {
            const double r = prob.y(i) - yhat(i);
            for (int a = 0; a < p; ++a) {
                jtwr(a) += w(i) * jac(i, a) * r;
                for (int b = 0; b < p; ++b) jtwj(a, b) += w(i) * jac(i, a) * jac(i, b);
            }
        }

        // Damped step with active-set handling: coordinates that the bound
        // projection pins are frozen at their bound and the system is
        // re-solved for the remaining ones, so the iterate can move along a
        // boundary face instead of zigzagging against it.
        auto bounded_step = [&](double lam) {
            MatrixXd damped = jtwj;
            for (int a = 0; a < p; ++a)
                damped(a, a) += lam * std::max(jtwj(a, a), 1e-30);

            std::vector<bool> pinned(static_cast<std::size_t>(p), false);
            VectorXd candidate = theta;
            for (int round = 0; round < p + 1; ++round) {
                MatrixXd a_red = damped;
                VectorXd rhs = jtwr;
                for (int j = 0; j < p; ++j) {
                    if (!pinned[static_cast<std::size_t>(j)]) continue;
                    const double fixed_move = candidate(j) - theta(j);
                    rhs -= jtwj.col(j) * fixed_move;
                    a_red.row(j).setZero();
                    a_red.col(j).setZero();
                    a_red(j, j) = 1.0;
                    rhs(j) = fixed_move;
                }
                const VectorXd delta = a_red.ldlt().solve(rhs);
                VectorXd raw = theta + delta;
                VectorXd projected = raw;
                project(projected);
                bool new_pin = false;
                for (int j = 0; j < p; ++j) {
                    if (pinned[static_cast<std::size_t>(j)]) continue;
                    if (projected(j) != raw(j)) {
                        pinned[static_cast<std::size_t>(j)] = true;
                        new_pin = true;
                    }
                }
                candidate = projected;
                if (!new_pin) break;
            }
            return candidate;
        };

        bool accepted = false;
        while (!accepted) {
            const VectorXd candidate = bounded_step(lambda);
            VectorXd yhat_new(n);
            prob.eval(candidate, yhat_new);
            const double chi2_new = chi_square(prob.y, yhat_new, w);

            bool at_fixed_point = false;
            if (chi2_new <= chi2) {
                double rel_change = 0.0;
                for (int a = 0; a < p; ++a)
                    rel_change = std::max(
                        rel_change, std::abs(candidate(a) - theta(a)) /
                                        (1.0 + std::abs(theta(a))));
                theta = candidate;
                yhat = yhat_new;
                chi2 = chi2_new;
                result.accepted_objectives.push_back(chi2_new);
                lambda = std::max(lambda / 3.0, 1e-14);
                accepted = true;
                at_fixed_point = rel_change < prob.rel_change_tol || chi2 == 0.0;
                if (!at_fixed_point) weights_fresh = false;
            } else {
                lambda *= 5.0;
                if (lambda > 1e15) {
                    // Step size has collapsed; the iterate cannot move.
                    accepted = true;
                    at_fixed_point = true;
                }
            }

            if (at_fixed_point) {
                if (!prob.weights || weights_fresh) {
                    converged = true;
                } else {
                    prob.weights(yhat, w);
                    chi2 = chi_square(prob.y, yhat, w);
                    weights_fresh = true;
                    lambda = 1e-3;
                }
            }
        }
    }

    result.parameters = theta;
    result.n_iterations = iter;
    result.converged = converged;

    fill_jacobian(theta);
    VectorXd sqrt_w(n);
    for (int i = 0; i < n; ++i) sqrt_w(i) = std::sqrt(w(i));
    const MatrixXd jw = sqrt_w.asDiagonal() * jac;
    Eigen::JacobiSVD<MatrixXd> svd(jw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sv_max = svd.singularValues()(0);
    const double sv_min = svd.singularValues()(p - 1);

    result.weighted_residuals.resize(n);
    for (int i = 0; i < n; ++i)
        result.weighted_residuals(i) = sqrt_w(i) * (prob.y(i) - yhat(i));
    result.reduced_chi_square = n > p ? chi2 / (n - p) : 0.0;

    if (!(sv_min > sv_max * 1e-10)) {
        const VectorXd dir = svd.matrixV().col(p - 1);
        const std::string combination = describe_combination(prob.parameter_names, dir);
        if (!prob.allow_degenerate)
            throw FitDegeneracy(prob.model_name +
                                    ": singular Jacobian, unidentifiable combination " +
                                    combination,
                                combination);
        result.warnings.push_back("degenerate_covariance");
    }
    MatrixXd vsinv = svd.matrixV();
    for (int j = 0; j < p; ++j) {
        const double sv = svd.singularValues()(j);
        if (sv > sv_max * 1e-10)
            vsinv.col(j) /= sv;
        else
            vsinv.col(j).setZero();  // pseudo-inverse on the singular directions
    }
    result.covariance = vsinv * vsinv.transpose();

    if (!converged)
        throw FitNonConvergence(prob.model_name + ": no convergence after " +
                                    std::to_string(prob.max_iterations) + " iterations",
                                result);
    return result;
}

// Binomial weights at the model prediction; half a count of regularization
// keeps them finite when the model touches 0 or 1.
std::function<void(const VectorXd&, VectorXd&)> binomial_weights(std::vector<double> trials) {
    return [trials = std::move(trials)](const VectorXd& yhat, VectorXd& w) {
        for (int i = 0; i < yhat.size(); ++i) {
            const double n = trials[static_cast<std::size_t>(i)];
            const double p = std::min(1.0 - 0.5 / n, std::max(0.5 / n, yhat(i)));
            w(i) = n / (p * (1.0 - p));
        }
    };
}

}  // namespace

// --- Two-level relaxation fit ----------------------------------------------------

FitResult fit_two_level_fractions(const std::vector<double>& times_tl,
                                  const std::vector<double>& dark_fractions,
                                  const std::vector<double>& trials,
                                  const DetectionModel& detection,
                                  const FitOptions& options) {
    detection.validate();
    const std::size_t n = times_tl.size();
    if (dark_fractions.size() != n || trials.size() != n)
        throw std::invalid_argument("fit_two_level_fractions: size mismatch");
    {
        std::vector<double> distinct = times_tl;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 4)
            throw std::invalid_argument(
                "fit_two_level_fractions: need at least 4 distinct time points");
    }

    // Initialization on corrected fractions: steady state from the tail,
    // p0 from the earliest point, T1 from a log-linear decay regression.
    // Point order is free, so the tail is selected by time.
    std::vector<double> p_up(n);
    for (std::size_t i = 0; i < n; ++i)
        p_up[i] = 1.0 - invert(dark_fractions[i], detection).value;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&times_tl](std::size_t a, std::size_t b) {
        return times_tl[a] < times_tl[b];
    });
    const std::size_t tail = std::max<std::size_t>(2, n / 4);
    double p_inf0 = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) p_inf0 += p_up[order[i]];
    p_inf0 /= static_cast<double>(tail);
    double p00 = p_up[order.front()];

    double t1_init = 0.0;
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = std::abs(p_up[i] - p_inf0);
            if (d < 0.02) continue;
            const double ly = std::log(d);
            sx += times_tl[i];
            sy += ly;
            sxx += times_tl[i] * times_tl[i];
            sxy += times_tl[i] * ly;
            ++m;
        }
        if (m >= 2 && sxx * m - sx * sx > 1e-12) {
            const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            if (slope < -1e-9) t1_init = -1.0 / slope;
        }
        if (t1_init <= 0.0)
            t1_init = std::max(1e-3, (times_tl.back() - times_tl.front()) / 2.0);
    }

    LmProblem prob;
    prob.y = Eigen::Map<const VectorXd>(dark_fractions.data(), static_cast<int>(n));
    prob.model_name = "two_level_relaxation";
    prob.parameter_names = {"T1_tL", "p_up0", "p_up_inf"};
    prob.max_iterations = options.max_iterations;
    prob.rel_change_tol = options.rel_change_tol;
    const double eta_down = detection.eta_dark_given_down;
    const double eta_up = detection.eta_dark_given_up;
    const std::vector<double> times = times_tl;
    prob.eval = [times, eta_down, eta_up](const VectorXd& theta, VectorXd& yhat) {
        const double t1 = theta(0), p0 = theta(1), pinf = theta(2);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double e = std::exp(-times[i] / t1);
            const double pu = pinf + (p0 - pinf) * e;
            yhat(static_cast<int>(i)) = eta_down * (1.0 - pu) + eta_up * pu;
        }
    };
    prob.jacobian = [times, eta_down, eta_up](const VectorXd& theta, MatrixXd& jac) {
        const double t1 = theta(0), p0 = theta(1), pinf = theta(2);
        const double dpd = -(eta_down - eta_up);  // d p_dark / d p_up
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double e = std::exp(-times[i] / t1);
            const int row = static_cast<int>(i);
            jac(row, 0) = dpd * (p0 - pinf) * e * times[i] / (t1 * t1);
            jac(row, 1) = dpd * e;
            jac(row, 2) = dpd * (1.0 - e);
        }
    };
    prob.weights = binomial_weights(trials);
    prob.project = [](VectorXd& t) {
        t(0) = std::max(1e-9, t(0));
        t(1) = std::min(1.0, std::max(0.0, t(1)));
        t(2) = std::min(1.0, std::max(0.0, t(2)));
    };

    VectorXd theta0(3);
    theta0 << t1_init, std::min(1.0, std::max(0.0, p00)),
        std::min(1.0, std::max(0.0, p_inf0));
    return levenberg_marquardt(prob, theta0);
}

FitResult fit_relaxation(const MeasurementSet& data, RelaxationModel model,
                         const DetectionModel& detection) {
    data.validate();
    if (model == RelaxationModel::four_level)
        return fit_relaxation_four_level({data}, detection);

    std::vector<double> times, fractions, trials;
    for (const auto& r : data.records) {
        times.push_back(r.t_over_tl);
        fractions.push_back(r.counts.dark_fraction());
        trials.push_back(static_cast<double>(r.counts.n_trials));
    }
    return fit_two_level_fractions(times, fractions, trials, detection);
}

// --- Four-level relaxation fit -----------------------------------------------------

namespace {

int four_level_index(const std::string& label) {
    const auto labels = four_level_labels();
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    throw std::invalid_argument("unknown four-level state label: " + label);
}

FourLevelRates rates_from_vector(const VectorXd& theta) {
    FourLevelRates r;
    r.transfer_0_to_plus = std::max(0.0, theta(0));
    r.transfer_plus_to_0 = std::max(0.0, theta(1));
    r.transfer_0_to_minus = std::max(0.0, theta(2));
    r.transfer_minus_to_0 = std::max(0.0, theta(3));
    r.decay_to_f0 = std::max(0.0, theta(4));
    r.pump_from_f0 = std::max(0.0, theta(5));
    return r;
}

}  // namespace

FitResult fit_relaxation_four_level(const std::vector<MeasurementSet>& data,
                                    const DetectionModel& detection) {
    detection.validate();
    if (data.empty()) throw std::invalid_argument("fit_relaxation_four_level: no data");

    struct Series {
        int prepared = 0;
        int observable = 0;
        std::vector<double> times;
    };
    std::vector<Series> series;
    std::vector<double> y_all, trials;
    std::vector<double> distinct_times;
    for (const auto& set : data) {
        set.validate();
        Series s;
        s.prepared = four_level_index(set.prepared_state.empty() ? "1,0" : set.prepared_state);
        s.observable =
            four_level_index(set.observable_state.empty() ? "0,0" : set.observable_state);
        for (const auto& r : set.records) {
            s.times.push_back(r.t_over_tl);
            y_all.push_back(r.counts.dark_fraction());
            trials.push_back(static_cast<double>(r.counts.n_trials));
            distinct_times.push_back(r.t_over_tl);
        }
        series.push_back(std::move(s));
    }
    std::sort(distinct_times.begin(), distinct_times.end());
    distinct_times.erase(std::unique(distinct_times.begin(), distinct_times.end()),
                         distinct_times.end());
    if (distinct_times.size() < 8)
        throw std::invalid_argument(
            "fit_relaxation_four_level: need at least 8 distinct time points");

    LmProblem prob;
    prob.y = Eigen::Map<const VectorXd>(y_all.data(), static_cast<int>(y_all.size()));
    prob.model_name = "four_level_relaxation";
    prob.parameter_names = {"transfer_0_to_plus",  "transfer_plus_to_0",
                            "transfer_0_to_minus", "transfer_minus_to_0",
                            "decay_to_f0",         "pump_from_f0"};
    const double eta_down = detection.eta_dark_given_down;
    const double eta_up = detection.eta_dark_given_up;
    prob.eval = [series, eta_down, eta_up](const VectorXd& theta, VectorXd& yhat) {
        const RateMatrix m = rates_from_vector(theta).rate_matrix();
        int row = 0;
        for (const auto& s : series) {
            SpinPopulation state;
            state.p = Eigen::VectorXd::Zero(4);
            state.p(s.prepared) = 1.0;
            double t_prev = 0.0;
            for (double t : s.times) {
                state = n_level_evolution(m, state, t - t_prev);
                t_prev = t;
                const double p_obs = state.p(s.observable);
                yhat(row++) = eta_down * p_obs + eta_up * (1.0 - p_obs);
            }
        }
    };
    prob.weights = binomial_weights(trials);
    prob.project = [](VectorXd& t) {
        for (int i = 0; i < t.size(); ++i) t(i) = std::max(0.0, t(i));
    };

    VectorXd theta0(6);
    theta0 << 0.5, 0.5, 0.5, 0.5, 0.3, 0.1;
    return levenberg_marquardt(prob, theta0);
}

// --- Fringe fit ----------------------------------------------------------------------

FitResult fit_fringe(const std::vector<FringeScanPoint>& scan,
                     const DetectionModel& detection) {
    std::vector<double> detunings, fractions, trials;
    for (const auto& p : scan) {
        p.counts.validate();
        detunings.push_back(p.detuning_hz);
        fractions.push_back(p.counts.dark_fraction());
        trials.push_back(static_cast<double>(p.counts.n_trials));
    }
    return fit_fringe_fractions(detunings, fractions, trials, detection);
}

FitResult fit_fringe_fractions(const std::vector<double>& detunings,
                               const std::vector<double>& fractions,
                               const std::vector<double>& trials,
                               const DetectionModel& detection) {
    detection.validate();
    if (detunings.size() < 6)
        throw std::invalid_argument("fit_fringe: need at least 6 scan points");
    if (fractions.size() != detunings.size() || trials.size() != detunings.size())
        throw std::invalid_argument("fit_fringe: size mismatch");
    const std::size_t n_points = detunings.size();
    const auto [min_it, max_it] = std::minmax_element(detunings.begin(), detunings.end());
    const double span = *max_it - *min_it;
    if (span <= 0.0) throw std::invalid_argument("fit_fringe: zero detuning span");

    // Bright fractions for initialization only.
    std::vector<double> bright(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        bright[i] = 1.0 - invert(fractions[i], detection).value;

    // Discrete period scan: linear LSQ of m + a cos + b sin at candidate
    // wait times, keep the candidate with the largest fringe amplitude.
    double best_t = 1.0 / span, best_a = 0.0, best_b = 0.0, best_score = -1.0;
    for (double k = 0.5; k <= static_cast<double>(n_points) / 2.0; k += 0.05) {
        const double t_candidate = k / span;
        double s_c = 0, s_s = 0, s_cc = 0, s_ss = 0, s_cs = 0, s_y = 0, s_yc = 0, s_ys = 0;
        const double n = static_cast<double>(n_points);
        for (std::size_t i = 0; i < n_points; ++i) {
            const double arg = constants::two_pi * detunings[i] * t_candidate;
            const double c = std::cos(arg), s = std::sin(arg);
            s_c += c; s_s += s; s_cc += c * c; s_ss += s * s; s_cs += c * s;
            s_y += bright[i]; s_yc += bright[i] * c; s_ys += bright[i] * s;
        }
        Eigen::Matrix3d m;
        m << n, s_c, s_s, s_c, s_cc, s_cs, s_s, s_cs, s_ss;
        Eigen::Vector3d rhs(s_y, s_yc, s_ys);
        if (std::abs(m.determinant()) < 1e-9) continue;
        const Eigen::Vector3d sol = m.fullPivLu().solve(rhs);
        const double score = sol(1) * sol(1) + sol(2) * sol(2);
        if (score > best_score) {
            best_score = score;
            best_t = t_candidate;
            best_a = sol(1);
            best_b = sol(2);
        }
    }
    double c_init = std::min(1.0, std::max(1e-3, 2.0 * std::hypot(best_a, best_b)));
    double phi_init = std::atan2(-best_b, best_a);

    LmProblem prob;
    prob.y = Eigen::Map<const VectorXd>(fractions.data(), static_cast<int>(fractions.size()));
    prob.model_name = "ramsey_fringe";
    prob.parameter_names = {"contrast", "phase_rad", "effective_wait_s"};
    const double eta_down = detection.eta_dark_given_down;
    const double eta_up = detection.eta_dark_given_up;
    prob.eval = [detunings, eta_down, eta_up](const VectorXd& theta, VectorXd& yhat) {
        const double c = theta(0), phi = theta(1), tw = theta(2);
        for (std::size_t i = 0; i < detunings.size(); ++i) {
            const double p_bright =
                0.5 + 0.5 * c * std::cos(constants::two_pi * detunings[i] * tw + phi);
            yhat(static_cast<int>(i)) = eta_down * (1.0 - p_bright) + eta_up * p_bright;
        }
    };
    prob.jacobian = [detunings, eta_down, eta_up](const VectorXd& theta, MatrixXd& jac) {
        const double c = theta(0), phi = theta(1), tw = theta(2);
        const double dpd = -(eta_down - eta_up);
        for (std::size_t i = 0; i < detunings.size(); ++i) {
            const double arg = constants::two_pi * detunings[i] * tw + phi;
            const int row = static_cast<int>(i);
            jac(row, 0) = dpd * 0.5 * std::cos(arg);
            jac(row, 1) = dpd * (-0.5 * c * std::sin(arg));
            jac(row, 2) = dpd * (-0.5 * c * std::sin(arg) * constants::two_pi * detunings[i]);
        }
    };
    prob.weights = binomial_weights(trials);
    prob.project = [](VectorXd& t) {
        t(0) = std::min(1.0, std::max(0.0, t(0)));
        t(2) = std::max(1e-9, t(2));
    };

    VectorXd theta0(3);
    theta0 << c_init, phi_init, best_t;
    FitResult fit = levenberg_marquardt(prob, theta0);

    // Derived quantities: fringe period and the implied center shift.
    const double c = fit.parameters(0);
    double phi = fit.parameters(1);
    const double tw = fit.parameters(2);
    phi = std::remainder(phi, constants::two_pi);
    const double period_hz = 1.0 / tw;
    const double shift_hz = -phi / (constants::two_pi * tw);
    Eigen::Vector2d g_period(0.0, -1.0 / (tw * tw));
    const double sigma_period = std::sqrt(
        g_period(1) * g_period(1) * fit.covariance(2, 2));
    Eigen::Vector2d g_shift(-1.0 / (constants::two_pi * tw),
                            phi / (constants::two_pi * tw * tw));
    Eigen::Matrix2d cov_pt;
    cov_pt << fit.covariance(1, 1), fit.covariance(1, 2), fit.covariance(2, 1),
        fit.covariance(2, 2);
    const double sigma_shift = std::sqrt(std::max(0.0, g_shift.dot(cov_pt * g_shift)));
    fit.derived.push_back({"period_hz", period_hz, sigma_period});
    fit.derived.push_back({"shift_hz", shift_hz, sigma_shift});

    const double sigma_c = std::sqrt(std::max(0.0, fit.covariance(0, 0)));
    if (c <= 2.0 * sigma_c) fit.warnings.push_back("low_snr_contrast");
    if (1.0 / tw < span / static_cast<double>(n_points))
        fit.warnings.push_back("period_below_scan_resolution");
    return fit;
}

// --- Contrast decay fit -----------------------------------------------------------------

namespace {

FitResult fit_contrast_impl(const std::vector<ContrastPoint>& points, bool fix_c0,
                            double c0_fixed) {
    const int min_points = fix_c0 ? 1 : 2;
    if (static_cast<int>(points.size()) < min_points)
        throw std::invalid_argument("fit_contrast_decay: not enough points");

    std::vector<double> times, contrasts, sigmas;
    for (const auto& p : points) {
        times.push_back(p.t_over_tl);
        contrasts.push_back(p.contrast);
        sigmas.push_back(p.sigma);
    }

    // Log-linear initialization on the positive contrasts.
    double c0_init = 0.5, t2_init = 0.0;
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (contrasts[i] <= 0.0) continue;
            const double ly = std::log(contrasts[i]);
            sx += times[i]; sy += ly; sxx += times[i] * times[i]; sxy += times[i] * ly;
            ++m;
        }
        if (m >= 2 && m * sxx - sx * sx > 1e-12) {
            const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            const double intercept = (sy - slope * sx) / m;
            c0_init = std::exp(intercept);
            if (slope < -1e-12) t2_init = -1.0 / slope;
        }
        if (t2_init <= 0.0)
            t2_init = std::max(1e-3, (times.back() - times.front()) / 2.0 + 1e-3);
        c0_init = std::min(1.5, std::max(1e-3, c0_init));
    }

    // An overall upward trend has no decaying-exponential optimum (T2 runs
    // away); such data is still fitted, flagged, with a pseudo-inverse
    // covariance on the runaway direction.
    bool increasing = false;
    if (points.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            sx += times[i]; sy += contrasts[i];
            sxx += times[i] * times[i]; sxy += times[i] * contrasts[i];
        }
        increasing = n * sxx - sx * sx > 1e-12 && (n * sxy - sx * sy) > 0.0;
    }

    LmProblem prob;
    prob.y = Eigen::Map<const VectorXd>(contrasts.data(), static_cast<int>(contrasts.size()));
    prob.model_name = "contrast_decay";
    prob.allow_degenerate = increasing;
    prob.weights = [sigmas](const VectorXd&, VectorXd& w) {
        for (int i = 0; i < w.size(); ++i) {
            const double s = sigmas[static_cast<std::size_t>(i)];
            w(i) = s > 0.0 ? 1.0 / (s * s) : 1.0;
        }
    };

    FitResult fit;
    if (fix_c0) {
        prob.parameter_names = {"T2_tL"};
        prob.eval = [times, c0_fixed](const VectorXd& theta, VectorXd& yhat) {
            for (std::size_t i = 0; i < times.size(); ++i)
                yhat(static_cast<int>(i)) = c0_fixed * std::exp(-times[i] / theta(0));
        };
        prob.jacobian = [times, c0_fixed](const VectorXd& theta, MatrixXd& jac) {
            const double t2 = theta(0);
            for (std::size_t i = 0; i < times.size(); ++i)
                jac(static_cast<int>(i), 0) =
                    c0_fixed * std::exp(-times[i] / t2) * times[i] / (t2 * t2);
        };
        prob.project = [](VectorXd& t) { t(0) = std::max(1e-9, t(0)); };
        VectorXd theta0(1);
        theta0 << t2_init;
        fit = levenberg_marquardt(prob, theta0);
    } else {
        prob.parameter_names = {"C0", "T2_tL"};
        prob.eval = [times](const VectorXd& theta, VectorXd& yhat) {
            for (std::size_t i = 0; i < times.size(); ++i)
                yhat(static_cast<int>(i)) = theta(0) * std::exp(-times[i] / theta(1));
        };
        prob.jacobian = [times](const VectorXd& theta, MatrixXd& jac) {
            const double c0 = theta(0), t2 = theta(1);
            for (std::size_t i = 0; i < times.size(); ++i) {
                const double e = std::exp(-times[i] / t2);
                jac(static_cast<int>(i), 0) = e;
                jac(static_cast<int>(i), 1) = c0 * e * times[i] / (t2 * t2);
            }
        };
        prob.project = [](VectorXd& t) {
            t(0) = std::min(1.5, std::max(1e-9, t(0)));
            t(1) = std::min(1e6, std::max(1e-9, t(1)));
        };
        VectorXd theta0(2);
        theta0 << c0_init, t2_init;
        fit = levenberg_marquardt(prob, theta0);
    }

    if (increasing) fit.warnings.push_back("increasing_contrast");
    return fit;
}

}  // namespace

FitResult fit_contrast_decay(const std::vector<ContrastPoint>& points) {
    return fit_contrast_impl(points, false, 0.0);
}

FitResult fit_contrast_decay_fixed_c0(const std::vector<ContrastPoint>& points, double c0) {
    if (c0 <= 0.0 || c0 > 1.0)
        throw std::invalid_argument("fit_contrast_decay_fixed_c0: C0 outside (0,1]");
    return fit_contrast_impl(points, true, c0);
}

// --- Rate decomposition with uncertainties ------------------------------------------

DecomposedRates derive_rate_decomposition(const FitResult& fit, bool stretched_bath) {
    int i_t1 = -1, i_p = -1;
    for (std::size_t i = 0; i < fit.parameter_names.size(); ++i) {
        if (fit.parameter_names[i] == "T1_tL") i_t1 = static_cast<int>(i);
        if (fit.parameter_names[i] == "p_up_inf") i_p = static_cast<int>(i);
    }
    if (i_t1 < 0 || i_p < 0)
        throw std::invalid_argument(
            "derive_rate_decomposition: fit must contain T1_tL and p_up_inf");

    const double t1 = fit.parameters(i_t1);
    const double p = fit.parameters(i_p);
    DecomposedRates out;
    out.rates = decompose_rates(t1, p, stretched_bath);

    Eigen::Matrix2d cov;
    cov << fit.covariance(i_t1, i_t1), fit.covariance(i_t1, i_p),
        fit.covariance(i_p, i_t1), fit.covariance(i_p, i_p);

    // gamma_SE = (2p-1)/T1, gamma_SR = (1-p)/T1; first order in (T1, p).
    Eigen::Vector2d g_se(-(2.0 * p - 1.0) / (t1 * t1), 2.0 / t1);
    Eigen::Vector2d g_sr(-(1.0 - p) / (t1 * t1), -1.0 / t1);
    out.sigma_down_se = std::sqrt(std::max(0.0, g_se.dot(cov * g_se)));
    out.sigma_sr = std::sqrt(std::max(0.0, g_sr.dot(cov * g_sr)));

    out.down_se_times_t1 = 2.0 * p - 1.0;
    out.sr_times_t1 = 1.0 - p;
    out.sigma_down_se_times_t1 = 2.0 * std::sqrt(std::max(0.0, cov(1, 1)));
    out.sigma_sr_times_t1 = std::sqrt(std::max(0.0, cov(1, 1)));
    return out;
}

// --- Bootstrap -------------------------------------------------------------------------

BootstrapSummary bootstrap(const MeasurementSet& data,
                           const std::function<FitResult(const MeasurementSet&)>& fitter,
                           int n_resamples, std::uint64_t seed) {
    data.validate();
    if (n_resamples < 1)
        throw std::invalid_argument("bootstrap: need at least one resample");

    BootstrapSummary summary;
    std::vector<VectorXd> rows;
    for (int k = 0; k < n_resamples; ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        MeasurementSet resampled = data;
        for (auto& r : resampled.records)
            r.counts.n_dark = rng.binomial(r.counts.n_trials, r.counts.dark_fraction());
        try {
            const FitResult fit = fitter(resampled);
            if (summary.parameter_names.empty())
                summary.parameter_names = fit.parameter_names;
            rows.push_back(fit.parameters);
        } catch (const std::exception&) {
            ++summary.n_failures;
        }
    }
    if (summary.n_failures * 5 > n_resamples)
        throw std::runtime_error("bootstrap: more than 20% of resampled fits failed");
    if (rows.empty()) throw std::runtime_error("bootstrap: no successful fits");

    const int p = static_cast<int>(rows.front().size());
    const int m = static_cast<int>(rows.size());
    summary.samples.resize(m, p);
    for (int i = 0; i < m; ++i) summary.samples.row(i) = rows[static_cast<std::size_t>(i)];

    summary.sigma.resize(p);
    summary.percentile_16.resize(p);
    summary.percentile_50.resize(p);
    summary.percentile_84.resize(p);
    for (int j = 0; j < p; ++j) {
        std::vector<double> col(m);
        for (int i = 0; i < m; ++i) col[static_cast<std::size_t>(i)] = summary.samples(i, j);
        std::sort(col.begin(), col.end());
        auto quantile = [&col, m](double q) {
            const double pos = q * (m - 1);
            const int lo = static_cast<int>(std::floor(pos));
            const int hi = std::min(m - 1, lo + 1);
            const double frac = pos - lo;
            return col[static_cast<std::size_t>(lo)] * (1.0 - frac) +
                   col[static_cast<std::size_t>(hi)] * frac;
        };
        summary.percentile_16(j) = quantile(0.16);
        summary.percentile_50(j) = quantile(0.50);
        summary.percentile_84(j) = quantile(0.84);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= m;
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        summary.sigma(j) = m > 1 ? std::sqrt(var / (m - 1)) : 0.0;
    }
    return summary;
}

}  // namespace ionbath
