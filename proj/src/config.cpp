#include "ionbath/config.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ionbath/collision_rates.hpp"
#include "ionbath/constants.hpp"
#include "ionbath/version.hpp"

namespace ionbath {

using json = nlohmann::json;

namespace {

void require_object(const json& node, const std::string& path) {
    if (!node.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown_keys(const json& node, const std::string& path,
                         const std::set<std::string>& allowed) {
    for (const auto& [key, value] : node.items())
        if (!allowed.count(key))
            throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
}

double get_number(const json& node, const std::string& path) {
    if (!node.is_number()) throw ConfigError(path, "expected a number");
    return node.get<double>();
}

std::string get_string(const json& node, const std::string& path) {
    if (!node.is_string()) throw ConfigError(path, "expected a string");
    return node.get<std::string>();
}

IonSpec parse_ion(const json& node, const std::string& path) {
    if (node.is_string()) {
        const std::string name = node.get<std::string>();
        if (name == "yb174") return presets::yb174();
        if (name == "yb171") return presets::yb171();
        throw ConfigError(path, "unknown ion preset '" + name + "'");
    }
    require_object(node, path);
    reject_unknown_keys(node, path,
                        {"isotope_label", "mass_u", "qubit", "hyperfine_splitting_ghz",
                         "zeeman_splitting_mhz"});
    IonSpec ion = presets::yb174();
    if (node.contains("isotope_label"))
        ion.isotope_label = get_string(node["isotope_label"], path + ".isotope_label");
    if (node.contains("mass_u")) ion.mass_u = get_number(node["mass_u"], path + ".mass_u");
    if (node.contains("qubit")) {
        const std::string kind = get_string(node["qubit"], path + ".qubit");
        if (kind == "zeeman_two_level")
            ion.qubit_kind = QubitKind::zeeman_two_level;
        else if (kind == "hyperfine_clock")
            ion.qubit_kind = QubitKind::hyperfine_clock;
        else
            throw ConfigError(path + ".qubit", "must be zeeman_two_level or hyperfine_clock");
    }
    if (node.contains("hyperfine_splitting_ghz"))
        ion.hyperfine_splitting_ghz =
            get_number(node["hyperfine_splitting_ghz"], path + ".hyperfine_splitting_ghz");
    if (node.contains("zeeman_splitting_mhz"))
        ion.zeeman_splitting_mhz =
            get_number(node["zeeman_splitting_mhz"], path + ".zeeman_splitting_mhz");
    return ion;
}

AtomSpec parse_bath(const json& node, const std::string& path, const AtomSpec& base) {
    require_object(node, path);
    reject_unknown_keys(node, path,
                        {"species", "state", "density_per_m3", "species_label", "mass_u",
                         "max_f", "hyperfine_splitting_ghz", "polarizability_si"});
    AtomSpec atom = base;
    if (node.contains("species")) {
        const std::string name = get_string(node["species"], path + ".species");
        if (name != "rb87")
            throw ConfigError(path + ".species", "unknown bath preset '" + name + "'");
        atom = presets::rb87(base.spin_state, base.density_per_m3);
    }
    if (node.contains("species_label"))
        atom.species_label = get_string(node["species_label"], path + ".species_label");
    if (node.contains("mass_u")) atom.mass_u = get_number(node["mass_u"], path + ".mass_u");
    if (node.contains("max_f"))
        atom.max_twice_f = 2 * static_cast<int>(get_number(node["max_f"], path + ".max_f"));
    if (node.contains("hyperfine_splitting_ghz"))
        atom.hyperfine_splitting_ghz =
            get_number(node["hyperfine_splitting_ghz"], path + ".hyperfine_splitting_ghz");
    if (node.contains("polarizability_si"))
        atom.polarizability_si =
            get_number(node["polarizability_si"], path + ".polarizability_si");
    if (node.contains("state")) {
        try {
            atom.spin_state = presets::parse_spin_state(get_string(node["state"], path + ".state"));
        } catch (const std::domain_error& e) {
            throw ConfigError(path + ".state", e.what());
        }
    }
    if (node.contains("density_per_m3"))
        atom.density_per_m3 = get_number(node["density_per_m3"], path + ".density_per_m3");
    return atom;
}

DetectionModel parse_detection(const json& node, const std::string& path,
                               std::string& preset_name) {
    if (node.is_string()) {
        preset_name = node.get<std::string>();
        try {
            return detection_presets::by_name(preset_name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path, e.what());
        }
    }
    require_object(node, path);
    reject_unknown_keys(node, path,
                        {"preset", "eta_dark_down", "eta_dark_up", "sigma_eta_down",
                         "sigma_eta_up"});
    preset_name = "custom";
    DetectionModel model = detection_presets::ideal();
    if (node.contains("preset")) {
        preset_name = get_string(node["preset"], path + ".preset");
        if (preset_name != "custom") {
            try {
                model = detection_presets::by_name(preset_name);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(path + ".preset", e.what());
            }
        }
    }
    if (node.contains("eta_dark_down"))
        model.eta_dark_given_down = get_number(node["eta_dark_down"], path + ".eta_dark_down");
    if (node.contains("eta_dark_up"))
        model.eta_dark_given_up = get_number(node["eta_dark_up"], path + ".eta_dark_up");
    if (node.contains("sigma_eta_down"))
        model.sigma_eta_down = get_number(node["sigma_eta_down"], path + ".sigma_eta_down");
    if (node.contains("sigma_eta_up"))
        model.sigma_eta_up = get_number(node["sigma_eta_up"], path + ".sigma_eta_up");
    return model;
}

}  // namespace

std::vector<double> TimeGridSpec::times_tl() const {
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(n_points));
    if (spacing == "linear") {
        for (int i = 0; i < n_points; ++i)
            times.push_back(t_max_tl * i / std::max(1, n_points - 1));
    } else {  // log grid, decades down from t_max
        times.push_back(0.0);
        const double t_min = t_max_tl * 1e-3;
        for (int i = 1; i < n_points; ++i) {
            const double f = static_cast<double>(i - 1) / std::max(1, n_points - 2);
            times.push_back(t_min * std::pow(t_max_tl / t_min, f));
        }
    }
    return times;
}

RamseySettings RamseySpec::settings() const {
    RamseySettings s;
    s.wait_time_s = wait_time_ms * 1e-3;
    s.baseline_contrast = baseline_contrast;
    s.phase_rad = phase_rad;
    s.extra_dephasing_per_tl = extra_dephasing_per_tl;
    return s;
}

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.ion = presets::yb174();
    cfg.bath = presets::rb87(SpinQuantum{4, 4}, 1e18);  // |2,2>
    cfg.detection_preset = "yb174_f2_bath";
    cfg.detection = detection_presets::yb174_f2_bath();
    return cfg;
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("(document)", e.what());
    }
    require_object(doc, "(root)");
    reject_unknown_keys(doc, "",
                        {"ion", "bath", "pair", "model", "branching", "four_level_rates",
                         "detection", "seed", "ensemble_size", "time_grid", "ramsey",
                         "density_systematic_fraction"});

    RunConfig cfg = defaults();
    if (doc.contains("ion")) cfg.ion = parse_ion(doc["ion"], "ion");
    if (doc.contains("bath")) cfg.bath = parse_bath(doc["bath"], "bath", cfg.bath);

    if (doc.contains("pair")) {
        const json& node = doc["pair"];
        require_object(node, "pair");
        reject_unknown_keys(node, "pair", {"c4_jm4", "collision_energy_mk"});
        if (node.contains("c4_jm4")) cfg.c4_jm4 = get_number(node["c4_jm4"], "pair.c4_jm4");
        if (node.contains("collision_energy_mk"))
            cfg.collision_energy_mk =
                get_number(node["collision_energy_mk"], "pair.collision_energy_mk");
    }

    if (doc.contains("model")) {
        const std::string model = get_string(doc["model"], "model");
        if (model == "two_level")
            cfg.model = KineticsModel::two_level;
        else if (model == "four_level")
            cfg.model = KineticsModel::four_level;
        else
            throw ConfigError("model", "must be two_level or four_level");
    }

    if (doc.contains("branching")) {
        const json& node = doc["branching"];
        require_object(node, "branching");
        reject_unknown_keys(node, "branching",
                            {"p_se", "p_sr", "epsilon", "energy_floor_mk",
                             "initial_energy_mk", "initial_state"});
        if (node.contains("p_se")) cfg.branching.p_se = get_number(node["p_se"], "branching.p_se");
        if (node.contains("p_sr")) cfg.branching.p_sr = get_number(node["p_sr"], "branching.p_sr");
        if (node.contains("epsilon") && !node["epsilon"].is_null())
            cfg.branching.epsilon = get_number(node["epsilon"], "branching.epsilon");
        if (node.contains("energy_floor_mk"))
            cfg.branching.energy_floor_mk =
                get_number(node["energy_floor_mk"], "branching.energy_floor_mk");
        if (node.contains("initial_energy_mk"))
            cfg.branching.initial_energy_mk =
                get_number(node["initial_energy_mk"], "branching.initial_energy_mk");
        if (node.contains("initial_state"))
            cfg.branching.initial_state =
                get_string(node["initial_state"], "branching.initial_state");
    }

    if (doc.contains("four_level_rates")) {
        const json& node = doc["four_level_rates"];
        require_object(node, "four_level_rates");
        reject_unknown_keys(node, "four_level_rates",
                            {"transfer_0_to_plus", "transfer_plus_to_0", "transfer_0_to_minus",
                             "transfer_minus_to_0", "decay_to_f0", "pump_from_f0"});
        auto field = [&](const char* key, double& target) {
            if (node.contains(key))
                target = get_number(node[key], std::string("four_level_rates.") + key);
        };
        field("transfer_0_to_plus", cfg.four_level_rates.transfer_0_to_plus);
        field("transfer_plus_to_0", cfg.four_level_rates.transfer_plus_to_0);
        field("transfer_0_to_minus", cfg.four_level_rates.transfer_0_to_minus);
        field("transfer_minus_to_0", cfg.four_level_rates.transfer_minus_to_0);
        field("decay_to_f0", cfg.four_level_rates.decay_to_f0);
        field("pump_from_f0", cfg.four_level_rates.pump_from_f0);
    }

    if (doc.contains("detection"))
        cfg.detection = parse_detection(doc["detection"], "detection", cfg.detection_preset);

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
            throw ConfigError("seed", "expected an integer");
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("ensemble_size")) {
        const double n = get_number(doc["ensemble_size"], "ensemble_size");
        if (n < 1) throw ConfigError("ensemble_size", "must be at least 1");
        cfg.ensemble_size = static_cast<std::size_t>(n);
    }

    if (doc.contains("time_grid")) {
        const json& node = doc["time_grid"];
        require_object(node, "time_grid");
        reject_unknown_keys(node, "time_grid", {"t_max_tl", "n_points", "spacing"});
        if (node.contains("t_max_tl"))
            cfg.time_grid.t_max_tl = get_number(node["t_max_tl"], "time_grid.t_max_tl");
        if (node.contains("n_points"))
            cfg.time_grid.n_points =
                static_cast<int>(get_number(node["n_points"], "time_grid.n_points"));
        if (node.contains("spacing"))
            cfg.time_grid.spacing = get_string(node["spacing"], "time_grid.spacing");
    }

    if (doc.contains("ramsey")) {
        const json& node = doc["ramsey"];
        require_object(node, "ramsey");
        reject_unknown_keys(node, "ramsey",
                            {"wait_time_ms", "baseline_contrast", "phase_rad",
                             "extra_dephasing_per_tl", "relaxation_rate_per_tl",
                             "exposures_t_over_tl", "fringe_exposure_t_over_tl",
                             "fringe_detuning_min_hz", "fringe_detuning_max_hz",
                             "fringe_n_points", "fringe_trials_per_point"});
        auto field = [&](const char* key, double& target) {
            if (node.contains(key)) target = get_number(node[key], std::string("ramsey.") + key);
        };
        field("wait_time_ms", cfg.ramsey.wait_time_ms);
        field("baseline_contrast", cfg.ramsey.baseline_contrast);
        field("phase_rad", cfg.ramsey.phase_rad);
        field("extra_dephasing_per_tl", cfg.ramsey.extra_dephasing_per_tl);
        field("relaxation_rate_per_tl", cfg.ramsey.relaxation_rate_per_tl);
        field("fringe_exposure_t_over_tl", cfg.ramsey.fringe_exposure_t_over_tl);
        field("fringe_detuning_min_hz", cfg.ramsey.fringe_detuning_min_hz);
        field("fringe_detuning_max_hz", cfg.ramsey.fringe_detuning_max_hz);
        if (node.contains("exposures_t_over_tl")) {
            if (!node["exposures_t_over_tl"].is_array())
                throw ConfigError("ramsey.exposures_t_over_tl", "expected an array");
            cfg.ramsey.exposures_t_over_tl.clear();
            std::size_t i = 0;
            for (const auto& v : node["exposures_t_over_tl"])
                cfg.ramsey.exposures_t_over_tl.push_back(get_number(
                    v, "ramsey.exposures_t_over_tl[" + std::to_string(i++) + "]"));
        }
        if (node.contains("fringe_n_points"))
            cfg.ramsey.fringe_n_points = static_cast<int>(
                get_number(node["fringe_n_points"], "ramsey.fringe_n_points"));
        if (node.contains("fringe_trials_per_point"))
            cfg.ramsey.fringe_trials_per_point = static_cast<long>(
                get_number(node["fringe_trials_per_point"], "ramsey.fringe_trials_per_point"));
    }

    if (doc.contains("density_systematic_fraction"))
        cfg.density_systematic_fraction =
            get_number(doc["density_systematic_fraction"], "density_systematic_fraction");

    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open configuration file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

std::string RunConfig::to_json_text() const {
    json doc;
    doc["ion"] = {{"isotope_label", ion.isotope_label},
                  {"mass_u", ion.mass_u},
                  {"qubit", ion.qubit_kind == QubitKind::zeeman_two_level
                                ? "zeeman_two_level"
                                : "hyperfine_clock"},
                  {"hyperfine_splitting_ghz", ion.hyperfine_splitting_ghz},
                  {"zeeman_splitting_mhz", ion.zeeman_splitting_mhz}};
    doc["bath"] = {{"species_label", bath.species_label},
                   {"mass_u", bath.mass_u},
                   {"state", to_string(bath.spin_state)},
                   {"max_f", bath.max_twice_f / 2},
                   {"density_per_m3", bath.density_per_m3},
                   {"hyperfine_splitting_ghz", bath.hyperfine_splitting_ghz},
                   {"polarizability_si", bath.polarizability_si}};
    doc["pair"] = {{"c4_jm4", c4_jm4}, {"collision_energy_mk", collision_energy_mk}};
    doc["model"] = model == KineticsModel::two_level ? "two_level" : "four_level";
    doc["branching"] = {{"p_se", branching.p_se},
                        {"p_sr", branching.p_sr},
                        {"epsilon", branching.epsilon ? json(*branching.epsilon) : json()},
                        {"energy_floor_mk", branching.energy_floor_mk},
                        {"initial_energy_mk", branching.initial_energy_mk},
                        {"initial_state", branching.initial_state}};
    doc["four_level_rates"] = {{"transfer_0_to_plus", four_level_rates.transfer_0_to_plus},
                               {"transfer_plus_to_0", four_level_rates.transfer_plus_to_0},
                               {"transfer_0_to_minus", four_level_rates.transfer_0_to_minus},
                               {"transfer_minus_to_0", four_level_rates.transfer_minus_to_0},
                               {"decay_to_f0", four_level_rates.decay_to_f0},
                               {"pump_from_f0", four_level_rates.pump_from_f0}};
    doc["detection"] = {{"preset", detection_preset},
                        {"eta_dark_down", detection.eta_dark_given_down},
                        {"eta_dark_up", detection.eta_dark_given_up},
                        {"sigma_eta_down", detection.sigma_eta_down},
                        {"sigma_eta_up", detection.sigma_eta_up}};
    doc["seed"] = seed;
    doc["ensemble_size"] = ensemble_size;
    doc["time_grid"] = {{"t_max_tl", time_grid.t_max_tl},
                        {"n_points", time_grid.n_points},
                        {"spacing", time_grid.spacing}};
    doc["ramsey"] = {{"wait_time_ms", ramsey.wait_time_ms},
                     {"baseline_contrast", ramsey.baseline_contrast},
                     {"phase_rad", ramsey.phase_rad},
                     {"extra_dephasing_per_tl", ramsey.extra_dephasing_per_tl},
                     {"relaxation_rate_per_tl", ramsey.relaxation_rate_per_tl},
                     {"exposures_t_over_tl", ramsey.exposures_t_over_tl},
                     {"fringe_exposure_t_over_tl", ramsey.fringe_exposure_t_over_tl},
                     {"fringe_detuning_min_hz", ramsey.fringe_detuning_min_hz},
                     {"fringe_detuning_max_hz", ramsey.fringe_detuning_max_hz},
                     {"fringe_n_points", ramsey.fringe_n_points},
                     {"fringe_trials_per_point", ramsey.fringe_trials_per_point}};
    doc["density_systematic_fraction"] = density_systematic_fraction;
    return doc.dump(2);
}

std::string RunConfig::config_hash() const { return hex_hash(fnv1a64(to_json_text())); }

void RunConfig::validate() const {
    try {
        ion.validate();
    } catch (const std::domain_error& e) {
        throw ConfigError("ion", e.what());
    }
    try {
        bath.validate();
    } catch (const std::domain_error& e) {
        throw ConfigError("bath", e.what());
    }
    if (c4_jm4 < 0.0) throw ConfigError("pair.c4_jm4", "must be nonnegative (0 = calibrated)");
    if (collision_energy_mk <= 0.0)
        throw ConfigError("pair.collision_energy_mk", "must be positive");
    try {
        pair().validate(bath.mass_kg(), ion.mass_kg());
    } catch (const std::domain_error& e) {
        throw ConfigError("pair", e.what());
    }

    if (model == KineticsModel::two_level && ion.qubit_kind != QubitKind::zeeman_two_level)
        throw ConfigError("model", "two_level kinetics needs a zeeman_two_level ion");
    if (model == KineticsModel::four_level && ion.qubit_kind != QubitKind::hyperfine_clock)
        throw ConfigError("model", "four_level kinetics needs a hyperfine_clock ion");

    if (branching.p_se < 0.0 || branching.p_se > 1.0)
        throw ConfigError("branching.p_se", "must be in [0,1]");
    if (branching.p_sr < 0.0 || branching.p_sr > 1.0)
        throw ConfigError("branching.p_sr", "must be in [0,1]");
    if (branching.p_se + branching.p_sr > 1.0)
        throw ConfigError("branching", "p_se + p_sr must not exceed 1");
    if (branching.epsilon && (*branching.epsilon < 0.0 || *branching.epsilon > 1.0))
        throw ConfigError("branching.epsilon", "must be in [0,1]");
    if (branching.energy_floor_mk < 0.0)
        throw ConfigError("branching.energy_floor_mk", "must be nonnegative");
    if (branching.initial_energy_mk < 0.0)
        throw ConfigError("branching.initial_energy_mk", "must be nonnegative");

    if (model == KineticsModel::two_level) {
        if (branching.initial_state != "up" && branching.initial_state != "down")
            throw ConfigError("branching.initial_state", "must be up or down");
    } else {
        const auto labels = four_level_labels();
        if (std::find(labels.begin(), labels.end(), branching.initial_state) == labels.end())
            throw ConfigError("branching.initial_state",
                              "must be one of 1,-1 / 1,0 / 1,1 / 0,0");
    }

    try {
        detection.validate();
    } catch (const std::domain_error& e) {
        throw ConfigError("detection", e.what());
    }

    if (time_grid.t_max_tl <= 0.0) throw ConfigError("time_grid.t_max_tl", "must be positive");
    if (time_grid.n_points < 2) throw ConfigError("time_grid.n_points", "must be at least 2");
    if (time_grid.spacing != "linear" && time_grid.spacing != "log")
        throw ConfigError("time_grid.spacing", "must be linear or log");

    try {
        ramsey.settings().validate();
    } catch (const std::domain_error& e) {
        throw ConfigError("ramsey", e.what());
    }
    if (ramsey.relaxation_rate_per_tl < 0.0)
        throw ConfigError("ramsey.relaxation_rate_per_tl", "must be nonnegative");
    if (ramsey.exposures_t_over_tl.empty())
        throw ConfigError("ramsey.exposures_t_over_tl", "must not be empty");
    for (double t : ramsey.exposures_t_over_tl)
        if (t < 0.0) throw ConfigError("ramsey.exposures_t_over_tl", "times must be nonnegative");
    if (ramsey.fringe_n_points < 6)
        throw ConfigError("ramsey.fringe_n_points", "need at least 6 points");
    if (ramsey.fringe_trials_per_point < 1)
        throw ConfigError("ramsey.fringe_trials_per_point", "must be at least 1");
    if (!(ramsey.fringe_detuning_min_hz < ramsey.fringe_detuning_max_hz))
        throw ConfigError("ramsey.fringe_detuning_min_hz", "must lie below the maximum");

    if (density_systematic_fraction < 0.0 || density_systematic_fraction > 1.0)
        throw ConfigError("density_systematic_fraction", "must be in [0,1]");

    if (ensemble_size < 1) throw ConfigError("ensemble_size", "must be at least 1");

    try {
        branching_config().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(model == KineticsModel::two_level ? "branching" : "four_level_rates",
                          e.what());
    } catch (const std::domain_error& e) {
        throw ConfigError("four_level_rates", e.what());
    }
}

PairParams RunConfig::pair() const {
    PairParams p;
    p.mu_kg = reduced_mass(bath.mass_kg(), ion.mass_kg());
    p.charge_c = constants::elementary_charge;
    if (c4_jm4 > 0.0)
        p.c4_jm4 = c4_jm4;
    else if (bath.polarizability_si > 0.0)
        p.c4_jm4 = c4_from_polarizability(bath.polarizability_si, p.charge_c);
    else
        p.c4_jm4 = calibrated_c4();
    p.collision_energy_j = units::joule_from_mk(collision_energy_mk);
    return p;
}

double RunConfig::gamma_langevin_per_s() const {
    const PairParams p = pair();
    return langevin_rate(p.c4_jm4, p.mu_kg, bath.density_per_m3);
}

double RunConfig::langevin_time_s() const { return 1.0 / gamma_langevin_per_s(); }

double RunConfig::epsilon_effective() const {
    if (branching.epsilon) return *branching.epsilon;
    return bath.spin_state.twice_f == bath.max_twice_f && bath.max_twice_f > 0 ? 1.0 : 0.0;
}

ChannelRuleSet RunConfig::rule_set() const {
    // Zeeman qubit: |up> = m_J=+1/2 first, |down> second.
    const std::vector<SpinQuantum> ion_states{{1, 1}, {1, -1}};
    return build_rule_set(ion_states, bath.spin_state, bath.max_twice_f);
}

BranchingConfig RunConfig::branching_config() const {
    BranchingConfig cfg;
    if (model == KineticsModel::two_level) {
        const ChannelRuleSet rules = rule_set();
        TwoLevelRates rates;
        rates.up_se = rules.se_allowed(0) ? branching.p_se : 0.0;
        rates.down_se = rules.se_allowed(1) ? branching.p_se : 0.0;
        rates.up_sr = branching.p_sr;
        rates.down_sr = branching.p_sr;
        cfg = BranchingConfig::two_level(rates, rules, gamma_langevin_per_s());
    } else {
        cfg = BranchingConfig::from_rate_matrix(four_level_rates.rate_matrix(),
                                                gamma_langevin_per_s());
        // Probabilities per collision are the per-t_L rates.
    }
    cfg.epsilon = epsilon_effective();
    cfg.energy_floor_j = units::joule_from_mk(branching.energy_floor_mk);
    cfg.atom_mass_kg = bath.mass_kg();
    cfg.ion_mass_kg = ion.mass_kg();
    cfg.atom_hfs_energy_j = bath.hyperfine_splitting_j();
    return cfg;
}

TrajectoryState RunConfig::initial_trajectory_state() const {
    TrajectoryState state;
    const BranchingConfig cfg = branching_config();
    state.spin = -1;
    for (int i = 0; i < cfg.n_states(); ++i)
        if (cfg.state_labels[static_cast<std::size_t>(i)] == branching.initial_state)
            state.spin = i;
    if (state.spin < 0)
        throw ConfigError("branching.initial_state",
                          "state '" + branching.initial_state + "' not in the model");
    state.kinetic_energy_j = units::joule_from_mk(branching.initial_energy_mk);
    return state;
}

}  // namespace ionbath
