#include "ionbath/rate_model.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace ionbath {

using json = nlohmann::json;

double TwoLevelRates::t1() const {
    const double sum = total();
    if (sum <= 0.0) throw std::domain_error("T1 undefined: both out-rates are zero");
    return 1.0 / sum;
}

double two_level_evolution(double p_up0, const TwoLevelRates& rates, double t) {
    if (p_up0 < 0.0 || p_up0 > 1.0)
        throw std::domain_error("two_level_evolution: p_up0 outside [0,1]");
    if (t < 0.0) throw std::domain_error("two_level_evolution: negative time");
    const double sum = rates.total();
    if (sum <= 0.0) return p_up0;  // frozen dynamics
    const double p_inf = rates.out_of_down() / sum;
    const double decay = std::exp(-t * sum);
    return p_up0 * decay + p_inf * (1.0 - decay);
}

double two_level_steady_state(const TwoLevelRates& rates) {
    const double sum = rates.total();
    if (sum <= 0.0)
        throw std::domain_error("two_level_steady_state: no steady state, all rates zero");
    return rates.out_of_down() / sum;
}

TwoLevelRates decompose_rates(double t1, double p_up_inf, bool stretched_bath) {
    if (!stretched_bath)
        throw std::invalid_argument(
            "decompose_rates: decomposition is only determined for a stretched bath");
    if (t1 <= 0.0) throw std::domain_error("decompose_rates: T1 must be positive");
    if (p_up_inf > 1.0)
        throw std::domain_error("decompose_rates: steady state above 1");
    if (p_up_inf < 0.5)
        throw std::invalid_argument(
            "decompose_rates: steady state below 1/2 is inconsistent with a "
            "stretched bath (would imply a negative exchange rate)");
    TwoLevelRates rates;
    rates.up_se = 0.0;
    rates.down_se = (2.0 * p_up_inf - 1.0) / t1;
    rates.up_sr = (1.0 - p_up_inf) / t1;
    rates.down_sr = rates.up_sr;
    return rates;
}

// --- Selection rules ------------------------------------------------------

bool ChannelRuleSet::se_allowed(int ion_from) const {
    const ExchangeChannel* c = se_channel(ion_from);
    return c != nullptr && !c->suppressed;
}

const ExchangeChannel* ChannelRuleSet::se_channel(int ion_from) const {
    for (const auto& c : channels)
        if (c.ion_from == ion_from) return &c;
    return nullptr;
}

ChannelRuleSet build_rule_set(const std::vector<SpinQuantum>& ion_states,
                              const SpinQuantum& atom_state, int atom_max_twice_f) {
    for (const auto& s : ion_states)
        if (!s.valid()) throw std::domain_error("build_rule_set: invalid ion state");
    if (!atom_state.valid() || atom_state.twice_f > atom_max_twice_f)
        throw std::domain_error("build_rule_set: invalid atom state");

    ChannelRuleSet rules;
    rules.ion_states = ion_states;
    rules.atom_state = atom_state;

    const int n = static_cast<int>(ion_states.size());
    for (int from = 0; from < n; ++from) {
        for (int to = 0; to < n; ++to) {
            if (to == from) continue;
            const int d_ion = ion_states[to].twice_mf - ion_states[from].twice_mf;
            if (std::abs(d_ion) != 2) continue;  // exchange moves one unit of m
            const int atom_mf = atom_state.twice_mf - d_ion;

            ExchangeChannel channel;
            channel.ion_from = from;
            channel.ion_to = to;
            if (std::abs(atom_mf) <= atom_state.twice_f) {
                // Product exists inside the atom's own manifold.
                channel.atom_to = SpinQuantum{atom_state.twice_f, atom_mf};
                channel.suppressed = false;
            } else if (atom_state.twice_f + 2 <= atom_max_twice_f &&
                       std::abs(atom_mf) <= atom_state.twice_f + 2) {
                // Requires promoting the atom to the upper manifold; the
                // hyperfine splitting dwarfs the collision energy, so the
                // channel is energetically suppressed.
                channel.atom_to = SpinQuantum{atom_state.twice_f + 2, atom_mf};
                channel.suppressed = true;
            } else {
                continue;  // no product state at all
            }
            rules.channels.push_back(channel);
        }
    }
    return rules;
}

// --- RateMatrix -------------------------------------------------------------

RateMatrix::RateMatrix(std::vector<std::string> labels, std::vector<RateEntry> entries)
    : labels_(std::move(labels)), entries_(std::move(entries)) {
    const int n = n_states();
    if (n < 2) throw std::invalid_argument("RateMatrix: need at least two states");
    generator_ = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : entries_) {
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n || e.from == e.to)
            throw std::invalid_argument("RateMatrix: entry indices out of range");
        if (e.value < 0.0)
            throw std::invalid_argument("RateMatrix: negative transition rate");
        generator_(e.to, e.from) += e.value;
    }
    for (int j = 0; j < n; ++j) {
        double out = 0.0;
        for (int i = 0; i < n; ++i)
            if (i != j) out += generator_(i, j);
        generator_(j, j) = -out;
    }
}

double RateMatrix::rate(int from, int to) const {
    if (from == to || from < 0 || to < 0 || from >= n_states() || to >= n_states())
        throw std::out_of_range("RateMatrix::rate: bad indices");
    return generator_(to, from);
}

std::string RateMatrix::to_json() const {
    json doc;
    doc["labels"] = labels_;
    json rates = json::array();
    for (const auto& e : entries_) {
        rates.push_back({{"from", e.from},
                         {"to", e.to},
                         {"value", e.value},
                         {"tag", e.kind == RateKind::spin_exchange ? "SE" : "SR"}});
    }
    doc["rates"] = rates;
    return doc.dump();
}

RateMatrix RateMatrix::from_json(const std::string& text) {
    const json doc = json::parse(text);
    std::vector<std::string> labels = doc.at("labels").get<std::vector<std::string>>();
    std::vector<RateEntry> entries;
    for (const auto& r : doc.at("rates")) {
        RateEntry e;
        e.from = r.at("from").get<int>();
        e.to = r.at("to").get<int>();
        e.value = r.at("value").get<double>();
        const std::string tag = r.at("tag").get<std::string>();
        if (tag == "SE")
            e.kind = RateKind::spin_exchange;
        else if (tag == "SR")
            e.kind = RateKind::spin_relaxation;
        else
            throw std::invalid_argument("RateMatrix::from_json: unknown tag " + tag);
        entries.push_back(e);
    }
    return RateMatrix(std::move(labels), std::move(entries));
}

// --- Propagation ------------------------------------------------------------

void SpinPopulation::validate() const {
    double sum = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        if (p(i) < -1e-12 || p(i) > 1.0 + 1e-12)
            throw std::domain_error("SpinPopulation: entry outside [0,1]");
        sum += p(i);
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::domain_error("SpinPopulation: probabilities do not sum to 1");
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a) {
    // Scaling and squaring with the degree-13 Pade approximant.
    static const double pade13[] = {64764752532480000.0, 32382376266240000.0,
                                    7771770303897600.0,  1187353796428800.0,
                                    129060195264000.0,   10559470521600.0,
                                    670442572800.0,      33522128640.0,
                                    1323241920.0,        40840800.0,
                                    960960.0,            16380.0,
                                    182.0,               1.0};
    const int n = static_cast<int>(a.rows());
    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
    int squarings = 0;
    const double theta13 = 5.371920351148152;
    if (norm > theta13)
        squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
    const Eigen::MatrixXd as = a / std::pow(2.0, squarings);

    const Eigen::MatrixXd a2 = as * as;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a2 * a4;
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);

    Eigen::MatrixXd u =
        as * (a6 * (pade13[13] * a6 + pade13[11] * a4 + pade13[9] * a2) +
              pade13[7] * a6 + pade13[5] * a4 + pade13[3] * a2 + pade13[1] * ident);
    Eigen::MatrixXd v = a6 * (pade13[12] * a6 + pade13[10] * a4 + pade13[8] * a2) +
                        pade13[6] * a6 + pade13[4] * a4 + pade13[2] * a2 +
                        pade13[0] * ident;

    Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
    for (int s = 0; s < squarings; ++s) r = r * r;
    return r;
}

SpinPopulation n_level_evolution(const RateMatrix& m, const SpinPopulation& p0, double t) {
    if (t < 0.0) throw std::domain_error("n_level_evolution: negative time");
    if (p0.p.size() != m.n_states())
        throw std::invalid_argument("n_level_evolution: population size mismatch");
    p0.validate();

    SpinPopulation out;
    out.time = p0.time + t;
    out.p = matrix_exponential(m.generator() * t) * p0.p;
    // Round-off hygiene: clamp the -1e-12-scale undershoot and renormalize.
    for (int i = 0; i < out.p.size(); ++i) out.p(i) = std::max(0.0, out.p(i));
    const double sum = out.p.sum();
    if (sum <= 0.0) throw std::runtime_error("n_level_evolution: degenerate propagation");
    out.p /= sum;
    return out;
}

namespace {

// Communicating classes of the transition graph, via boolean reachability.
std::vector<std::vector<int>> closed_classes(const Eigen::MatrixXd& gen) {
    const int n = static_cast<int>(gen.rows());
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) reach[i][i] = true;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (i != j && gen(i, j) > 0.0) reach[j][i] = true;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;

    std::vector<int> cls(n, -1);
    int n_classes = 0;
    for (int i = 0; i < n; ++i) {
        if (cls[i] >= 0) continue;
        cls[i] = n_classes;
        for (int j = i + 1; j < n; ++j)
            if (reach[i][j] && reach[j][i]) cls[j] = n_classes;
        ++n_classes;
    }

    std::vector<std::vector<int>> result;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<int> members;
        bool closed = true;
        for (int i = 0; i < n; ++i) {
            if (cls[i] != c) continue;
            members.push_back(i);
            for (int j = 0; j < n; ++j)
                if (cls[j] != c && gen(j, i) > 0.0) closed = false;
        }
        if (closed) result.push_back(members);
    }
    return result;
}

}  // namespace

SpinPopulation n_level_steady_state(const RateMatrix& m) {
    const auto& gen = m.generator();
    const auto classes = closed_classes(gen);
    if (classes.size() != 1) {
        std::ostringstream msg;
        msg << "n_level_steady_state: " << classes.size()
            << " absorbing classes, steady state is not unique:";
        for (const auto& cls : classes) {
            msg << " {";
            for (std::size_t k = 0; k < cls.size(); ++k)
                msg << (k ? "," : "") << m.labels()[cls[k]];
            msg << "}";
        }
        throw std::runtime_error(msg.str());
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(gen);
    lu.setThreshold(1e-12);
    const Eigen::MatrixXd kernel = lu.kernel();
    if (kernel.cols() != 1)
        throw std::runtime_error("n_level_steady_state: kernel dimension != 1");

    SpinPopulation out;
    out.p = kernel.col(0);
    if (out.p.sum() < 0.0) out.p = -out.p;
    for (int i = 0; i < out.p.size(); ++i) out.p(i) = std::max(0.0, out.p(i));
    out.p /= out.p.sum();
    out.time = 0.0;
    return out;
}

// --- Four-level model --------------------------------------------------------

std::vector<std::string> four_level_labels() {
    return {"1,-1", "1,0", "1,1", "0,0"};
}

RateMatrix FourLevelRates::rate_matrix() const {
    const double values[] = {transfer_0_to_plus,  transfer_plus_to_0,
                             transfer_0_to_minus, transfer_minus_to_0,
                             decay_to_f0,         pump_from_f0};
    for (double v : values)
        if (v < 0.0) throw std::domain_error("FourLevelRates: rates must be nonnegative");

    std::vector<RateEntry> entries;
    auto add = [&entries](int from, int to, double value, RateKind kind) {
        if (value > 0.0) entries.push_back({from, to, value, kind});
    };
    add(four_level_zero, four_level_plus, transfer_0_to_plus, RateKind::spin_exchange);
    add(four_level_plus, four_level_zero, transfer_plus_to_0, RateKind::spin_exchange);
    add(four_level_zero, four_level_minus, transfer_0_to_minus, RateKind::spin_relaxation);
    add(four_level_minus, four_level_zero, transfer_minus_to_0, RateKind::spin_relaxation);
    for (int m : {four_level_minus, four_level_zero, four_level_plus}) {
        add(m, four_level_f0, decay_to_f0, RateKind::spin_relaxation);
        add(four_level_f0, m, pump_from_f0 / 3.0, RateKind::spin_relaxation);
    }
    return RateMatrix(four_level_labels(), std::move(entries));
}

FourLevelRates FourLevelRates::with_steady_p1(const FourLevelRates& base, double p1) {
    if (p1 <= 0.0 || p1 >= 1.0)
        throw std::domain_error("with_steady_p1: p1 must lie in (0,1)");
    if (base.decay_to_f0 <= 0.0)
        throw std::domain_error("with_steady_p1: needs a positive decay rate");
    // Stationary F-manifold balance: p1 * decay = p0 * pump.
    FourLevelRates out = base;
    out.pump_from_f0 = base.decay_to_f0 * p1 / (1.0 - p1);
    return out;
}

std::vector<SpinPopulation> two_timescale_fit_model(const FourLevelRates& rates,
                                                    const std::vector<double>& times) {
    const RateMatrix m = rates.rate_matrix();
    SpinPopulation init;
    init.p = Eigen::VectorXd::Zero(4);
    init.p(four_level_zero) = 1.0;

    std::vector<SpinPopulation> curves;
    curves.reserve(times.size());
    for (double t : times) curves.push_back(n_level_evolution(m, init, t));
    return curves;
}

std::vector<double> relaxation_eigenvalues(const RateMatrix& m) {
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(m.generator());
    std::vector<double> magnitudes;
    for (int i = 0; i < m.n_states(); ++i) {
        const double mag = std::abs(solver.eigenvalues()(i).real());
        if (mag > 1e-12) magnitudes.push_back(mag);
    }
    std::sort(magnitudes.begin(), magnitudes.end());
    return magnitudes;
}

}  // namespace ionbath
