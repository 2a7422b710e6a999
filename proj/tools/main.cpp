// Command-line entry point: reproducible simulation and fitting runs from
// one JSON configuration. Every emitted file carries the toolkit version
// and the configuration hash; identical config + seed give byte-identical
// outputs regardless of --workers.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "ionbath/collision_mc.hpp"
#include "ionbath/collision_rates.hpp"
#include "ionbath/config.hpp"
#include "ionbath/constants.hpp"
#include "ionbath/estimate.hpp"
#include "ionbath/ramsey.hpp"
#include "ionbath/version.hpp"

namespace {

using namespace ionbath;
using json = nlohmann::json;

struct GlobalOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int workers = 0;  // 0 = hardware concurrency
    bool print_config = false;
};

RunConfig load_config(const GlobalOptions& opts) {
    RunConfig cfg = opts.config_path.empty() ? RunConfig::defaults()
                                             : RunConfig::from_file(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    cfg.validate();
    return cfg;
}

std::string csv_meta(const RunConfig& cfg) {
    return "# version=" + std::string(toolkit_version) + "\n# config_hash=" +
           cfg.config_hash() + "\n";
}

json json_meta(const RunConfig& cfg) {
    return {{"version", toolkit_version},
            {"config_hash", cfg.config_hash()},
            {"seed", cfg.seed}};
}

void write_file(const GlobalOptions& opts, const std::string& name,
                const std::string& content) {
    std::filesystem::create_directories(opts.out_dir);
    const auto path = std::filesystem::path(opts.out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    std::cout << "wrote " << path.string() << "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<double> grid_seconds(const RunConfig& cfg) {
    std::vector<double> grid = cfg.time_grid.times_tl();
    const double t_l = cfg.langevin_time_s();
    for (double& t : grid) t *= t_l;
    return grid;
}

// --- rates ---------------------------------------------------------------

int cmd_rates(const GlobalOptions& opts) {
    const RunConfig cfg = load_config(opts);
    const PairParams pair = cfg.pair();
    const double n_a = cfg.bath.density_per_m3;
    // Rate constants at unit density; absolute rates scale linearly.
    const double gl_per_n = langevin_rate(pair.c4_jm4, pair.mu_kg, 1.0);
    const double gc_per_n =
        total_collision_rate(pair.c4_jm4, pair.mu_kg, pair.collision_energy_j, 1.0);
    const double gamma_l = gl_per_n * n_a;
    const double gamma_c = gc_per_n * n_a;

    std::printf("pair: %s + %s in |%s>_a\n", cfg.ion.isotope_label.c_str(),
                cfg.bath.species_label.c_str(), to_string(cfg.bath.spin_state).c_str());
    std::printf("  reduced mass          %.4f u\n", units::u_from_kg(pair.mu_kg));
    std::printf("  C4                    %.4e J m^4\n", pair.c4_jm4);
    std::printf("  density               %.3e m^-3\n", n_a);
    std::printf("  collision energy      k_B x %.1f mK\n", cfg.collision_energy_mk);
    std::printf("  gamma_L               %.4e 1/s\n", gamma_l);
    std::printf("  gamma_L / n_a         %.4e m^3/s\n", gl_per_n);
    if (gamma_l > 0.0)
        std::printf("  t_L                   %.2f us\n",
                    units::us_from_seconds(1.0 / gamma_l));
    std::printf("  gamma_c               %.4e 1/s\n", gamma_c);
    std::printf("  gamma_c / n_a         %.4e m^3/s\n", gc_per_n);
    std::printf("  gamma_c / gamma_L     %.2f\n", gc_per_n / gl_per_n);

    json doc;
    doc["_meta"] = json_meta(cfg);
    doc["reduced_mass_u"] = units::u_from_kg(pair.mu_kg);
    doc["c4_jm4"] = pair.c4_jm4;
    doc["density_per_m3"] = n_a;
    doc["collision_energy_mk"] = cfg.collision_energy_mk;
    doc["gamma_L_per_s"] = gamma_l;
    doc["gamma_L_over_n_m3s"] = gl_per_n;
    if (gamma_l > 0.0) doc["t_L_us"] = units::us_from_seconds(1.0 / gamma_l);
    doc["gamma_c_per_s"] = gamma_c;
    doc["gamma_c_over_n_m3s"] = gc_per_n;
    doc["gamma_ratio"] = gc_per_n / gl_per_n;
    write_file(opts, "rates.json", doc.dump(2) + "\n");
    return 0;
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate_relax(const GlobalOptions& opts) {
    const RunConfig cfg = load_config(opts);
    const EnsembleStats stats =
        run_ensemble(cfg.initial_trajectory_state(), cfg.branching_config(), grid_seconds(cfg),
                     cfg.ensemble_size, cfg.seed, opts.workers);

    write_file(opts, "relax_curve.csv", csv_meta(cfg) + stats.to_csv());

    // Synthetic measurement record: every trajectory is read out through
    // the detection model at each grid time, giving a counts file the
    // fitting pipeline consumes directly.
    {
        const std::string dark_label =
            cfg.model == KineticsModel::two_level ? "down" : "0,0";
        MeasurementSet record;
        for (std::size_t g = 0; g < stats.grid_s.size(); ++g) {
            Rng rng(derive_seed(cfg.seed, 5000 + g));
            long n_dark = 0;
            for (std::size_t s = 0; s < stats.labels.size(); ++s) {
                const long occupied = std::lround(
                    stats.populations[s][g] * static_cast<double>(stats.n_trajectories));
                const double eta = stats.labels[s] == dark_label
                                       ? cfg.detection.eta_dark_given_down
                                       : cfg.detection.eta_dark_given_up;
                n_dark += rng.binomial(occupied, eta);
            }
            record.records.push_back(
                {stats.grid_s[g] * stats.gamma_langevin_per_s,
                 {static_cast<long>(stats.n_trajectories), n_dark}});
        }
        write_file(opts, "relax_counts.csv", csv_meta(cfg) + record.to_csv());
    }

    json doc;
    doc["_meta"] = json_meta(cfg);
    doc["n_trajectories"] = stats.n_trajectories;
    doc["t_L_us"] = units::us_from_seconds(cfg.langevin_time_s());
    if (cfg.model == KineticsModel::two_level) {
        const BranchingConfig bc = cfg.branching_config();
        TwoLevelRates rates;  // per t_L: probabilities per collision
        for (const auto& c : bc.channels) {
            if (c.from == 0 && c.kind == RateKind::spin_exchange) rates.up_se += c.probability;
            if (c.from == 0 && c.kind == RateKind::spin_relaxation) rates.up_sr += c.probability;
            if (c.from == 1 && c.kind == RateKind::spin_exchange) rates.down_se += c.probability;
            if (c.from == 1 && c.kind == RateKind::spin_relaxation) rates.down_sr += c.probability;
        }
        doc["analytic"] = {{"T1_tL", rates.t1()},
                           {"p_up_inf", two_level_steady_state(rates)}};
    } else {
        const SpinPopulation steady =
            n_level_steady_state(cfg.four_level_rates.rate_matrix());
        json p = json::object();
        const auto labels = four_level_labels();
        for (std::size_t i = 0; i < labels.size(); ++i)
            p[labels[i]] = steady.p(static_cast<int>(i));
        doc["analytic"] = {{"steady_state", p}};
        const double p1 = steady.p(four_level_minus) + steady.p(four_level_zero) +
                          steady.p(four_level_plus);
        doc["analytic"]["steady_p1"] = p1;
        if (p1 > 0.0 && p1 < 0.75 && cfg.ion.hyperfine_splitting_ghz > 0.0)
            doc["analytic"]["spin_temperature_mk"] =
                spin_temperature(p1, cfg.ion.hyperfine_splitting_j()) * 1e3;
    }
    json final_p = json::object();
    for (std::size_t s = 0; s < stats.labels.size(); ++s)
        final_p[stats.labels[s]] = stats.populations[s].back();
    doc["mc_final_populations"] = final_p;
    write_file(opts, "relax_summary.json", doc.dump(2) + "\n");
    return 0;
}

int cmd_simulate_energy(const GlobalOptions& opts) {
    const RunConfig cfg = load_config(opts);
    const BranchingConfig bc = cfg.branching_config();
    const EnsembleStats stats =
        run_ensemble(cfg.initial_trajectory_state(), bc, grid_seconds(cfg),
                     cfg.ensemble_size, cfg.seed, opts.workers);

    write_file(opts, "energy_curve.csv", csv_meta(cfg) + stats.to_csv());

    const double steady = steady_energy_analytic(bc.epsilon, bc.atom_mass_kg,
                                                 bc.ion_mass_kg, bc.atom_hfs_energy_j);
    const double horizon_s = stats.grid_s.back();
    const double mean_ode = mean_energy_solution(
        units::joule_from_mk(cfg.branching.initial_energy_mk), bc.epsilon, bc.atom_mass_kg,
        bc.ion_mass_kg, bc.atom_hfs_energy_j, bc.gamma_langevin_per_s, horizon_s);

    json doc;
    doc["_meta"] = json_meta(cfg);
    doc["epsilon"] = bc.epsilon;
    doc["steady_energy_analytic_mK"] = units::mk_from_joule(steady);
    doc["energy_floor_mK"] = units::mk_from_joule(bc.energy_floor_j);
    doc["mean_energy_ode_horizon_mK"] = units::mk_from_joule(mean_ode);
    doc["mc_mean_energy_horizon_mK"] = units::mk_from_joule(stats.mean_energy_j.back());
    doc["mc_energy_stderr_horizon_mK"] = units::mk_from_joule(stats.energy_stderr_j.back());
    write_file(opts, "energy_summary.json", doc.dump(2) + "\n");
    return 0;
}

int cmd_simulate_ramsey(const GlobalOptions& opts) {
    const RunConfig cfg = load_config(opts);
    const RamseySettings settings = cfg.ramsey.settings();

    std::vector<ContrastPoint> decay;
    for (std::size_t i = 0; i < cfg.ramsey.exposures_t_over_tl.size(); ++i) {
        const double t = cfg.ramsey.exposures_t_over_tl[i];
        const ContrastEstimate est = simulate_ramsey_mc(
            settings, cfg.ramsey.relaxation_rate_per_tl, t, cfg.ensemble_size,
            derive_seed(cfg.seed, 1000 + i));
        decay.push_back({t, est.contrast, est.stderr_contrast});
    }
    write_file(opts, "ramsey_contrast.csv", csv_meta(cfg) + contrast_points_to_csv(decay));

    std::vector<double> detunings;
    for (int i = 0; i < cfg.ramsey.fringe_n_points; ++i)
        detunings.push_back(cfg.ramsey.fringe_detuning_min_hz +
                            (cfg.ramsey.fringe_detuning_max_hz -
                             cfg.ramsey.fringe_detuning_min_hz) *
                                i / (cfg.ramsey.fringe_n_points - 1));
    const auto scan = simulate_fringe_scan(
        settings, cfg.ramsey.relaxation_rate_per_tl, cfg.ramsey.fringe_exposure_t_over_tl,
        detunings, cfg.ramsey.fringe_trials_per_point, cfg.detection,
        derive_seed(cfg.seed, 2000));
    write_file(opts, "ramsey_fringe.csv", csv_meta(cfg) + fringe_scan_to_csv(scan));

    const double total_rate =
        cfg.ramsey.relaxation_rate_per_tl + cfg.ramsey.extra_dephasing_per_tl;
    json doc;
    doc["_meta"] = json_meta(cfg);
    doc["baseline_contrast"] = settings.baseline_contrast;
    doc["wait_time_ms"] = cfg.ramsey.wait_time_ms;
    doc["fringe_period_hz"] = 1.0 / settings.wait_time_s;
    doc["total_spin_changing_rate_per_tL"] = total_rate;
    if (total_rate > 0.0) doc["T2_analytic_tL"] = 1.0 / total_rate;
    write_file(opts, "ramsey_summary.json", doc.dump(2) + "\n");
    return 0;
}

// --- fit ------------------------------------------------------------------------

int emit_fit(const GlobalOptions& opts, const RunConfig& cfg, const FitResult& fit,
             const std::string& filename, json extra = json::object()) {
    json doc = json::parse(fit.to_json());
    doc["_meta"] = json_meta(cfg);
    // Absolute-time systematic from the bath-density calibration; quoted
    // multiplicatively on t_L, never folded into the statistical errors.
    doc["t_L_systematic_fraction"] = cfg.density_systematic_fraction;
    for (auto& [key, value] : extra.items()) doc[key] = value;
    const std::string text = doc.dump(2) + "\n";
    write_file(opts, filename, text);
    std::cout << text;
    return fit.converged ? 0 : 3;
}

int cmd_fit_relax(const GlobalOptions& opts, const std::string& input,
                  const std::string& model_name, bool decompose,
                  const std::vector<std::string>& series,
                  const std::string& prepared_state) {
    const RunConfig cfg = load_config(opts);
    const RelaxationModel model = model_name == "four_level"
                                      ? RelaxationModel::four_level
                                      : RelaxationModel::two_level;

    FitResult fit;
    if (!series.empty()) {
        // Joint four-level fit over labeled curves: --series <state>=<csv>.
        std::vector<MeasurementSet> sets;
        for (const std::string& entry : series) {
            const auto eq = entry.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("--series expects <state>=<csv>: " + entry);
            MeasurementSet set = MeasurementSet::from_csv(read_file(entry.substr(eq + 1)));
            set.observable_state = entry.substr(0, eq);
            set.prepared_state = prepared_state;
            set.detection_preset = cfg.detection_preset;
            sets.push_back(std::move(set));
        }
        fit = fit_relaxation_four_level(sets, cfg.detection);
    } else {
        MeasurementSet data = MeasurementSet::from_csv(read_file(input));
        data.detection_preset = cfg.detection_preset;
        data.prepared_state = prepared_state;
        fit = fit_relaxation(data, model, cfg.detection);
    }

    json extra = json::object();
    if (decompose && model == RelaxationModel::two_level) {
        const DecomposedRates d = derive_rate_decomposition(fit, true);
        extra["rate_decomposition"] = {
            {"gamma_down_se_per_tL", d.rates.down_se},
            {"sigma_gamma_down_se_per_tL", d.sigma_down_se},
            {"gamma_sr_per_tL", d.rates.up_sr},
            {"sigma_gamma_sr_per_tL", d.sigma_sr},
            {"gamma_down_se_times_T1", d.down_se_times_t1},
            {"sigma_gamma_down_se_times_T1", d.sigma_down_se_times_t1},
            {"gamma_sr_times_T1", d.sr_times_t1},
            {"sigma_gamma_sr_times_T1", d.sigma_sr_times_t1}};
    }
    return emit_fit(opts, cfg, fit, "fit_relax.json", extra);
}

int cmd_fit_fringe(const GlobalOptions& opts, const std::string& input) {
    const RunConfig cfg = load_config(opts);
    const auto scan = fringe_scan_from_csv(read_file(input));
    const FitResult fit = fit_fringe(scan, cfg.detection);
    return emit_fit(opts, cfg, fit, "fit_fringe.json");
}

int cmd_fit_contrast(const GlobalOptions& opts, const std::string& input,
                     std::optional<double> fix_c0) {
    const RunConfig cfg = load_config(opts);
    const auto points = contrast_points_from_csv(read_file(input));
    const FitResult fit = fix_c0 ? fit_contrast_decay_fixed_c0(points, *fix_c0)
                                 : fit_contrast_decay(points);
    return emit_fit(opts, cfg, fit, "fit_contrast.json");
}

// --- reproduce table1 -------------------------------------------------------------

struct ReferenceRow {
    const char* ion;
    const char* bath;
    double t1;        // generation value; <= 0 means not reported
    double t1_err;
    double p_inf;
    double p_inf_err;
    const char* preset;
    bool stretched;   // decomposition quoted for this row
};

int cmd_reproduce_table1(const GlobalOptions& opts) {
    const RunConfig cfg = load_config(opts);

    // Reference decoherence times and steady states; rows without a
    // reported T1 are generated with a 2.0 t_L placeholder and compared on
    // the steady state only.
    const ReferenceRow rows[] = {
        {"171Yb+", "1,-1", 1.73, 0.17, 0.000, 0.005, "yb171_hyperfine", false},
        {"171Yb+", "2,2", 3.39, 0.16, 0.163, 0.013, "yb171_hyperfine", false},
        {"174Yb+", "2,2", 2.50, 0.39, 0.609, 0.015, "yb174_f2_bath", true},
        {"174Yb+", "2,-2", -1.0, 0.0, 0.423, 0.026, "yb174_f2_bath", false},
        {"174Yb+", "1,1", 1.60, 0.24, 0.563, 0.017, "yb174_f1_bath", false},
        {"174Yb+", "1,-1", -1.0, 0.0, 0.457, 0.021, "yb174_f1_bath", false},
    };
    const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0,
                           3.0, 4.0,  6.0, 8.0,  10.0, 12.0};
    const long trials = 3000;

    json table = json::array();
    std::printf("%-8s %-6s | %-18s %-18s | %-16s %-16s\n", "ion", "bath", "T1/tL (ref)",
                "T1/tL (fit)", "p_inf (ref)", "p_inf (fit)");
    int failures = 0;
    std::size_t row_index = 0;
    for (const ReferenceRow& row : rows) {
        const double t1_gen = row.t1 > 0.0 ? row.t1 : 2.0;
        const DetectionModel detection = detection_presets::by_name(row.preset);
        Rng rng(derive_seed(cfg.seed, 3000 + row_index++));

        MeasurementSet data;
        data.ion_label = row.ion;
        data.bath_label = row.bath;
        data.detection_preset = row.preset;
        for (double t : grid) {
            const double p_up = row.p_inf + (1.0 - row.p_inf) * std::exp(-t / t1_gen);
            const double p_dark = forward_model(1.0 - p_up, detection);
            MeasurementPoint point;
            point.t_over_tl = t;
            point.counts.n_trials = trials;
            point.counts.n_dark = rng.binomial(trials, p_dark);
            data.records.push_back(point);
        }

        const FitResult fit = fit_relaxation(data, RelaxationModel::two_level, detection);
        const double t1_fit = fit.value("T1_tL");
        const double t1_sigma = fit.sigma("T1_tL");
        const double p_fit = fit.value("p_up_inf");
        const double p_sigma = fit.sigma("p_up_inf");

        const bool t1_ok = row.t1 <= 0.0 || std::abs(t1_fit - row.t1) < 3.0 * t1_sigma;
        const bool p_ok = std::abs(p_fit - row.p_inf) < 3.0 * std::max(p_sigma, 1e-4);
        if (!t1_ok || !p_ok) ++failures;

        char t1_ref[32], t1_got[32], p_ref[32], p_got[32];
        if (row.t1 > 0.0)
            std::snprintf(t1_ref, sizeof(t1_ref), "%.2f +- %.2f", row.t1, row.t1_err);
        else
            std::snprintf(t1_ref, sizeof(t1_ref), "-");
        std::snprintf(t1_got, sizeof(t1_got), "%.2f +- %.2f", t1_fit, t1_sigma);
        std::snprintf(p_ref, sizeof(p_ref), "%.3f +- %.3f", row.p_inf, row.p_inf_err);
        std::snprintf(p_got, sizeof(p_got), "%.3f +- %.3f", p_fit, p_sigma);
        std::printf("%-8s %-6s | %-18s %-18s | %-16s %-16s %s\n", row.ion, row.bath, t1_ref,
                    t1_got, p_ref, p_got, (t1_ok && p_ok) ? "ok" : "MISMATCH");

        json entry = {{"ion", row.ion},
                      {"bath", row.bath},
                      {"T1_tL_ref", row.t1 > 0.0 ? json(row.t1) : json()},
                      {"T1_tL_fit", t1_fit},
                      {"T1_tL_sigma", t1_sigma},
                      {"p_inf_ref", row.p_inf},
                      {"p_inf_fit", p_fit},
                      {"p_inf_sigma", p_sigma},
                      {"consistent", t1_ok && p_ok}};
        if (row.stretched) {
            const DecomposedRates d = derive_rate_decomposition(fit, true);
            entry["gamma_down_se_times_T1"] = d.down_se_times_t1;
            entry["sigma_gamma_down_se_times_T1"] = d.sigma_down_se_times_t1;
            entry["gamma_sr_times_T1"] = d.sr_times_t1;
            entry["sigma_gamma_sr_times_T1"] = d.sigma_sr_times_t1;
            std::printf("%-8s %-6s | exchange x T1 = %.3f +- %.3f, relaxation x T1 = "
                        "%.3f +- %.3f\n",
                        "", "", d.down_se_times_t1, d.sigma_down_se_times_t1, d.sr_times_t1,
                        d.sigma_sr_times_t1);
        }
        table.push_back(entry);
    }

    // The transverse time of the clock qubit: Monte Carlo contrast decay at
    // the reference rate, fitted back.
    {
        const double t2_ref = 1.4, t2_err = 0.2;
        RamseySettings settings = cfg.ramsey.settings();
        std::vector<ContrastPoint> decay;
        const double exposures[] = {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
        std::size_t i = 0;
        for (double t : exposures) {
            const ContrastEstimate est =
                simulate_ramsey_mc(settings, 1.0 / t2_ref, t, cfg.ensemble_size,
                                   derive_seed(cfg.seed, 4000 + i++));
            decay.push_back({t, est.contrast, std::max(est.stderr_contrast, 1e-4)});
        }
        const FitResult fit = fit_contrast_decay(decay);
        const double t2 = fit.value("T2_tL");
        const double t2_sigma = fit.sigma("T2_tL");
        const bool t2_ok = std::abs(t2 - t2_ref) < 3.0 * std::max(t2_sigma, 1e-3);
        if (!t2_ok) ++failures;
        std::printf("%-8s %-6s | T2/tL: %.1f +- %.1f (ref)  %.3f +- %.3f (fit) %s\n",
                    "171Yb+", "2,2", t2_ref, t2_err, t2, t2_sigma,
                    t2_ok ? "ok" : "MISMATCH");
        table.push_back({{"ion", "171Yb+"},
                         {"bath", "2,2"},
                         {"T2_tL_ref", t2_ref},
                         {"T2_tL_fit", t2},
                         {"T2_tL_sigma", t2_sigma},
                         {"consistent", t2_ok}});
    }

    json doc;
    doc["_meta"] = json_meta(cfg);
    doc["trials_per_point"] = trials;
    doc["rows"] = table;
    write_file(opts, "table1_comparison.json", doc.dump(2) + "\n");
    std::printf("%s\n", failures == 0 ? "all rows consistent within 3 sigma"
                                      : "some rows inconsistent");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ion-in-bath spin kinetics: rates, simulation, and fitting"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "JSON configuration file");
    app.add_option("--seed", opts.seed, "override the configuration seed");
    app.add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    app.add_option("--workers", opts.workers, "worker threads (0 = auto)")
        ->capture_default_str();
    app.add_flag("--print-config", opts.print_config,
                 "print the fully resolved configuration and exit");

    auto* rates = app.add_subcommand("rates", "collision-rate table for the configured pair");
    rates->fallthrough();

    auto* simulate = app.add_subcommand("simulate", "stochastic trajectory ensembles");
    simulate->require_subcommand(1);
    simulate->fallthrough();
    auto* sim_relax = simulate->add_subcommand("relax", "spin-relaxation ensemble");
    auto* sim_energy = simulate->add_subcommand("energy", "kinetic-energy ensemble");
    auto* sim_ramsey = simulate->add_subcommand("ramsey", "Ramsey contrast and fringe scan");
    for (auto* sub : {sim_relax, sim_energy, sim_ramsey}) sub->fallthrough();

    auto* fit = app.add_subcommand("fit", "weighted least-squares fits of CSV data");
    fit->require_subcommand(1);
    fit->fallthrough();
    auto* fit_relax_cmd = fit->add_subcommand("relax", "relaxation curve fit");
    std::string fit_input, fit_model = "two_level", fit_prepared = "1,0";
    std::vector<std::string> fit_series;
    bool fit_decompose = false;
    fit_relax_cmd->add_option("--input", fit_input, "CSV: t_over_tL,n_trials,n_dark");
    fit_relax_cmd->add_option("--model", fit_model, "two_level or four_level")
        ->check(CLI::IsMember({"two_level", "four_level"}))
        ->capture_default_str();
    fit_relax_cmd->add_flag("--decompose", fit_decompose,
                            "emit the stretched-bath SE/SR rate decomposition");
    fit_relax_cmd
        ->add_option("--series", fit_series,
                     "four-level curve as <state>=<csv>, repeatable")
        ->expected(-1);
    fit_relax_cmd
        ->add_option("--prepared", fit_prepared, "initially prepared state")
        ->capture_default_str();
    auto* fit_fringe_cmd = fit->add_subcommand("fringe", "Ramsey fringe fit");
    std::string fringe_input;
    fit_fringe_cmd->add_option("--input", fringe_input, "CSV: detuning_hz,n_trials,n_dark")
        ->required();
    auto* fit_contrast_cmd = fit->add_subcommand("contrast", "contrast decay fit");
    std::string contrast_input;
    std::optional<double> fix_c0;
    fit_contrast_cmd->add_option("--input", contrast_input, "CSV: t_over_tL,contrast,sigma")
        ->required();
    fit_contrast_cmd->add_option("--fix-c0", fix_c0, "hold the baseline contrast fixed");

    for (auto* sub : {fit_relax_cmd, fit_fringe_cmd, fit_contrast_cmd}) sub->fallthrough();

    auto* reproduce = app.add_subcommand("reproduce", "end-to-end reference pipelines");
    reproduce->require_subcommand(1);
    reproduce->fallthrough();
    auto* repro_table1 =
        reproduce->add_subcommand("table1", "synthetic round trip of the reference table");
    repro_table1->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (opts.print_config) {
            std::cout << load_config(opts).to_json_text() << "\n";
            return 0;
        }
        if (rates->parsed()) return cmd_rates(opts);
        if (sim_relax->parsed()) return cmd_simulate_relax(opts);
        if (sim_energy->parsed()) return cmd_simulate_energy(opts);
        if (sim_ramsey->parsed()) return cmd_simulate_ramsey(opts);
        if (fit_relax_cmd->parsed()) {
            if (fit_input.empty() && fit_series.empty())
                throw std::runtime_error("fit relax needs --input or --series");
            return cmd_fit_relax(opts, fit_input, fit_model, fit_decompose, fit_series,
                                 fit_prepared);
        }
        if (fit_fringe_cmd->parsed()) return cmd_fit_fringe(opts, fringe_input);
        if (fit_contrast_cmd->parsed())
            return cmd_fit_contrast(opts, contrast_input, fix_c0);
        if (repro_table1->parsed()) return cmd_reproduce_table1(opts);
        std::cout << app.help();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const FitNonConvergence& e) {
        std::cerr << "fit did not converge: " << e.what() << "\n";
        std::cerr << e.last.to_json() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
