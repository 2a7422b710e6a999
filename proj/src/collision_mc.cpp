#include "ionbath/collision_mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ionbath/constants.hpp"

namespace ionbath {

double BranchingConfig::cooling_fraction() const {
    const double sum = atom_mass_kg + ion_mass_kg;
    return 2.0 * atom_mass_kg * ion_mass_kg / (sum * sum);
}

double BranchingConfig::heating_quantum_j() const {
    return atom_hfs_energy_j * atom_mass_kg / (atom_mass_kg + ion_mass_kg);
}

void BranchingConfig::validate() const {
    if (state_labels.size() < 1)
        throw std::invalid_argument("BranchingConfig: no states");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("BranchingConfig: epsilon outside [0,1]");
    if (energy_floor_j < 0.0)
        throw std::invalid_argument("BranchingConfig: negative energy floor");
    if (gamma_langevin_per_s <= 0.0)
        throw std::invalid_argument("BranchingConfig: Langevin rate must be positive");
    if (atom_mass_kg <= 0.0 || ion_mass_kg <= 0.0)
        throw std::invalid_argument("BranchingConfig: masses must be positive");
    std::vector<double> out_sum(state_labels.size(), 0.0);
    for (const auto& c : channels) {
        if (c.from < 0 || c.from >= n_states() || c.to < 0 || c.to >= n_states() ||
            c.from == c.to)
            throw std::invalid_argument("BranchingConfig: channel indices out of range");
        if (c.probability < 0.0 || c.probability > 1.0)
            throw std::invalid_argument("BranchingConfig: channel probability outside [0,1]");
        out_sum[c.from] += c.probability;
    }
    for (double s : out_sum)
        if (s > 1.0 + 1e-12)
            throw std::invalid_argument(
                "BranchingConfig: branching probabilities out of a state exceed 1");
}

RateMatrix BranchingConfig::induced_rate_matrix() const {
    std::vector<RateEntry> entries;
    for (const auto& c : channels)
        if (c.probability > 0.0)
            entries.push_back({c.from, c.to, c.probability, c.kind});
    return RateMatrix(state_labels, std::move(entries));
}

BranchingConfig BranchingConfig::two_level(const TwoLevelRates& rates_per_tl,
                                           const ChannelRuleSet& rules,
                                           double gamma_langevin_per_s) {
    if (rules.ion_states.size() != 2)
        throw std::invalid_argument("two_level: rule set must describe two ion states");
    // State 0 = |up>, state 1 = |down>, matching the rule-set order.
    if (rates_per_tl.up_se > 0.0 && !rules.se_allowed(0))
        throw std::invalid_argument(
            "two_level: exchange out of |up> is forbidden for this bath");
    if (rates_per_tl.down_se > 0.0 && !rules.se_allowed(1))
        throw std::invalid_argument(
            "two_level: exchange out of |down> is forbidden for this bath");

    BranchingConfig cfg;
    cfg.state_labels = {"up", "down"};
    cfg.gamma_langevin_per_s = gamma_langevin_per_s;
    auto add = [&cfg](int from, int to, double p, RateKind kind) {
        if (p > 0.0) cfg.channels.push_back({from, to, p, kind});
    };
    add(0, 1, rates_per_tl.up_se, RateKind::spin_exchange);
    add(0, 1, rates_per_tl.up_sr, RateKind::spin_relaxation);
    add(1, 0, rates_per_tl.down_se, RateKind::spin_exchange);
    add(1, 0, rates_per_tl.down_sr, RateKind::spin_relaxation);
    return cfg;
}

BranchingConfig BranchingConfig::from_rate_matrix(const RateMatrix& matrix,
                                                  double gamma_langevin_per_s) {
    BranchingConfig cfg;
    cfg.state_labels = matrix.labels();
    cfg.gamma_langevin_per_s = gamma_langevin_per_s;
    for (const auto& e : matrix.entries())
        cfg.channels.push_back({e.from, e.to, e.value, e.kind});
    return cfg;
}

TrajectoryState step_collision(const TrajectoryState& state, const BranchingConfig& cfg,
                               Rng& rng) {
    TrajectoryState next = state;
    next.time_s += rng.exponential(cfg.gamma_langevin_per_s);
    next.collision_count += 1;

    // Spin branch: walk the channels out of the current state.
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (const auto& c : cfg.channels) {
        if (c.from != state.spin) continue;
        cumulative += c.probability;
        if (u < cumulative) {
            next.spin = c.to;
            break;
        }
    }

    // Energy balance, independent of the spin outcome.
    const bool flip = rng.bernoulli(cfg.epsilon);
    double loss_fraction = cfg.cooling_fraction();
    if (cfg.energy_update == EnergyUpdateMode::sampled_angle) {
        const double cos_theta = 2.0 * rng.uniform() - 1.0;
        loss_fraction *= 1.0 - cos_theta;  // mean over angles is kappa
    }
    const double cooled = state.kinetic_energy_j * (1.0 - loss_fraction);
    const double heated = cooled + (flip ? cfg.heating_quantum_j() : 0.0);
    next.kinetic_energy_j = std::max(cfg.energy_floor_j, heated);
    return next;
}

std::vector<TrajectoryState> run_trajectory(const TrajectoryState& init,
                                            const BranchingConfig& cfg,
                                            double horizon_s, Rng& rng) {
    if (horizon_s <= 0.0) throw std::invalid_argument("run_trajectory: horizon must be positive");
    std::vector<TrajectoryState> timeline{init};
    TrajectoryState state = init;
    for (;;) {
        TrajectoryState next = step_collision(state, cfg, rng);
        if (next.time_s >= horizon_s) break;
        timeline.push_back(next);
        state = next;
    }
    return timeline;
}

namespace {

struct BlockAccumulator {
    std::vector<std::vector<long>> counts;  // [state][grid]
    std::vector<double> energy_sum;
    std::vector<double> energy_sumsq;

    BlockAccumulator(int n_states, std::size_t n_grid)
        : counts(n_states, std::vector<long>(n_grid, 0)),
          energy_sum(n_grid, 0.0),
          energy_sumsq(n_grid, 0.0) {}
};

constexpr std::size_t kBlockSize = 256;

// One trajectory, recorded on the grid: the state at grid time t is the
// state after the last collision with time <= t.
void accumulate_trajectory(const TrajectoryState& init, const BranchingConfig& cfg,
                           const std::vector<double>& grid_s, std::uint64_t seed,
                           BlockAccumulator& acc) {
    Rng rng(seed);
    const double horizon = grid_s.back();
    TrajectoryState state = init;
    std::size_t gi = 0;
    for (;;) {
        const TrajectoryState next = step_collision(state, cfg, rng);
        while (gi < grid_s.size() && grid_s[gi] < next.time_s) {
            acc.counts[state.spin][gi] += 1;
            acc.energy_sum[gi] += state.kinetic_energy_j;
            acc.energy_sumsq[gi] += state.kinetic_energy_j * state.kinetic_energy_j;
            ++gi;
        }
        if (gi >= grid_s.size() || next.time_s > horizon) break;
        state = next;
    }
    for (; gi < grid_s.size(); ++gi) {
        acc.counts[state.spin][gi] += 1;
        acc.energy_sum[gi] += state.kinetic_energy_j;
        acc.energy_sumsq[gi] += state.kinetic_energy_j * state.kinetic_energy_j;
    }
}

}  // namespace

EnsembleStats run_ensemble(const TrajectoryState& init, const BranchingConfig& cfg,
                           const std::vector<double>& grid_s, std::size_t n_trajectories,
                           std::uint64_t base_seed, int n_workers) {
    cfg.validate();
    if (n_trajectories < 1)
        throw std::invalid_argument("run_ensemble: need at least one trajectory");
    if (grid_s.empty() || !std::is_sorted(grid_s.begin(), grid_s.end()))
        throw std::invalid_argument("run_ensemble: grid must be nonempty and sorted");
    if (init.spin < 0 || init.spin >= cfg.n_states())
        throw std::invalid_argument("run_ensemble: initial spin index out of range");

    const std::size_t n_blocks = (n_trajectories + kBlockSize - 1) / kBlockSize;
    std::vector<BlockAccumulator> blocks(n_blocks,
                                         BlockAccumulator(cfg.n_states(), grid_s.size()));

    auto process_block = [&](std::size_t b) {
        const std::size_t begin = b * kBlockSize;
        const std::size_t end = std::min(n_trajectories, begin + kBlockSize);
        for (std::size_t index = begin; index < end; ++index)
            accumulate_trajectory(init, cfg, grid_s, derive_seed(base_seed, index),
                                  blocks[b]);
    };

    int workers = n_workers;
    if (workers <= 0)
        workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n_blocks)));

    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) process_block(b);
    } else {
        std::atomic<std::size_t> next_block{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t b = next_block.fetch_add(1);
                    if (b >= n_blocks) return;
                    process_block(b);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    // Deterministic reduction: blocks merged in index order.
    EnsembleStats stats;
    stats.grid_s = grid_s;
    stats.labels = cfg.state_labels;
    stats.n_trajectories = n_trajectories;
    stats.base_seed = base_seed;
    stats.gamma_langevin_per_s = cfg.gamma_langevin_per_s;

    const std::size_t n_grid = grid_s.size();
    const int n_states = cfg.n_states();
    std::vector<std::vector<long>> counts(n_states, std::vector<long>(n_grid, 0));
    std::vector<double> esum(n_grid, 0.0), esumsq(n_grid, 0.0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        for (int s = 0; s < n_states; ++s)
            for (std::size_t g = 0; g < n_grid; ++g) counts[s][g] += blocks[b].counts[s][g];
        for (std::size_t g = 0; g < n_grid; ++g) {
            esum[g] += blocks[b].energy_sum[g];
            esumsq[g] += blocks[b].energy_sumsq[g];
        }
    }

    const double n = static_cast<double>(n_trajectories);
    stats.populations.assign(n_states, std::vector<double>(n_grid, 0.0));
    stats.population_stderr.assign(n_states, std::vector<double>(n_grid, 0.0));
    stats.mean_energy_j.resize(n_grid);
    stats.energy_stderr_j.resize(n_grid);
    for (std::size_t g = 0; g < n_grid; ++g) {
        for (int s = 0; s < n_states; ++s) {
            const double p = counts[s][g] / n;
            stats.populations[s][g] = p;
            stats.population_stderr[s][g] = std::sqrt(p * (1.0 - p) / n);
        }
        const double mean = esum[g] / n;
        stats.mean_energy_j[g] = mean;
        const double var = n > 1 ? std::max(0.0, (esumsq[g] - n * mean * mean) / (n - 1.0))
                                 : 0.0;
        stats.energy_stderr_j[g] = std::sqrt(var / n);
    }
    return stats;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// State labels may contain commas ("1,-1"); CSV headers use underscores.
std::string csv_label(const std::string& label) {
    std::string out = label;
    for (char& c : out)
        if (c == ',') c = '_';
    return out;
}

}  // namespace

std::string EnsembleStats::to_csv() const {
    std::ostringstream out;
    out << "t_over_tL";
    for (const auto& l : labels) out << ",p_" << csv_label(l);
    out << ",mean_Ekin_mK";
    for (const auto& l : labels) out << ",stderr_p_" << csv_label(l);
    out << ",stderr_Ekin_mK\n";
    for (std::size_t g = 0; g < grid_s.size(); ++g) {
        out << format_double(grid_s[g] * gamma_langevin_per_s);
        for (std::size_t s = 0; s < labels.size(); ++s)
            out << ',' << format_double(populations[s][g]);
        out << ',' << format_double(units::mk_from_joule(mean_energy_j[g]));
        for (std::size_t s = 0; s < labels.size(); ++s)
            out << ',' << format_double(population_stderr[s][g]);
        out << ',' << format_double(units::mk_from_joule(energy_stderr_j[g])) << '\n';
    }
    return out.str();
}

std::string EnsembleStats::to_json() const {
    nlohmann::json doc;
    doc["labels"] = labels;
    doc["t_over_tL"] = nlohmann::json::array();
    for (double t : grid_s) doc["t_over_tL"].push_back(t * gamma_langevin_per_s);
    doc["populations"] = populations;
    doc["population_stderr"] = population_stderr;
    nlohmann::json e = nlohmann::json::array(), se = nlohmann::json::array();
    for (std::size_t g = 0; g < grid_s.size(); ++g) {
        e.push_back(units::mk_from_joule(mean_energy_j[g]));
        se.push_back(units::mk_from_joule(energy_stderr_j[g]));
    }
    doc["mean_Ekin_mK"] = e;
    doc["stderr_Ekin_mK"] = se;
    doc["n_trajectories"] = n_trajectories;
    doc["base_seed"] = base_seed;
    doc["gamma_langevin_per_s"] = gamma_langevin_per_s;
    return doc.dump(2);
}

double steady_energy_analytic(double epsilon, double atom_mass_kg, double ion_mass_kg,
                              double atom_hfs_energy_j) {
    if (atom_mass_kg <= 0.0 || ion_mass_kg <= 0.0)
        throw std::domain_error("steady_energy_analytic: masses must be positive");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::domain_error("steady_energy_analytic: epsilon outside [0,1]");
    return epsilon * atom_hfs_energy_j * (atom_mass_kg + ion_mass_kg) / (2.0 * ion_mass_kg);
}

double mean_energy_solution(double e0_j, double epsilon, double atom_mass_kg,
                            double ion_mass_kg, double atom_hfs_energy_j,
                            double gamma_langevin_per_s, double t_s) {
    const double sum = atom_mass_kg + ion_mass_kg;
    const double kappa = 2.0 * atom_mass_kg * ion_mass_kg / (sum * sum);
    const double steady =
        steady_energy_analytic(epsilon, atom_mass_kg, ion_mass_kg, atom_hfs_energy_j);
    // Poisson-averaged per-collision recursion: E[(1-kappa)^K] = e^(-kappa gamma t).
    return steady + (e0_j - steady) * std::exp(-kappa * gamma_langevin_per_s * t_s);
}

double spin_temperature(double p1, double ion_hfs_energy_j) {
    if (p1 <= 0.0) throw std::domain_error("spin_temperature: p1 must be positive");
    if (p1 >= 0.75)
        throw std::domain_error(
            "spin_temperature: p1 >= 3/4 exceeds the degeneracy limit, no finite "
            "temperature exists");
    if (ion_hfs_energy_j <= 0.0)
        throw std::domain_error("spin_temperature: hyperfine energy must be positive");
    return ion_hfs_energy_j / constants::boltzmann /
           std::log(3.0 * (1.0 - p1) / p1);
}

}  // namespace ionbath
