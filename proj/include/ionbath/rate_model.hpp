#pragma once

// Deterministic population kinetics: the closed-form two-level rate
// equation, its spin-exchange / spin-relaxation decomposition, the
// m_F-conservation selection rules, and an N-level master-equation engine
// (matrix exponential, N <= 8). Times in this module are in Langevin
// units t_L unless a name says otherwise.

#include <eigen3/Eigen/Dense>
#include <string>
#include <vector>

#include "ionbath/species.hpp"

namespace ionbath {

enum class RateKind { spin_exchange, spin_relaxation };

// Out-rates of the two qubit states, each split into its SE and SR part.
struct TwoLevelRates {
    double up_se = 0.0;    // spin exchange out of |up>
    double up_sr = 0.0;    // spin relaxation out of |up>
    double down_se = 0.0;
    double down_sr = 0.0;

    double out_of_up() const { return up_se + up_sr; }
    double out_of_down() const { return down_se + down_sr; }
    double total() const { return out_of_up() + out_of_down(); }
    double t1() const;
};

// p_up(t) = p_up0 e^(-t/T1) + p_up_inf (1 - e^(-t/T1)).
double two_level_evolution(double p_up0, const TwoLevelRates& rates, double t);

// p_up_inf = gamma_out_down / (gamma_out_up + gamma_out_down).
double two_level_steady_state(const TwoLevelRates& rates);

// Invert (T1, p_up_inf) into rates for a maximally polarized (stretched)
// bath, where exchange out of |up> is forbidden and the relaxation rates
// of the two states coincide:
//   gamma_down_SE = (2 p_inf - 1)/T1,   gamma_SR = (1 - p_inf)/T1.
TwoLevelRates decompose_rates(double t1, double p_up_inf, bool stretched_bath);

// --- Selection rules ------------------------------------------------------

// One candidate spin-exchange channel between two ion states. Exchange
// moves one unit of projection from atom to ion (or back); the channel is
// suppressed when the atom would have to be promoted to a higher
// hyperfine manifold, and absent when no product state exists at all.
struct ExchangeChannel {
    int ion_from = 0;
    int ion_to = 0;
    SpinQuantum atom_to;
    bool suppressed = false;
};

struct ChannelRuleSet {
    std::vector<SpinQuantum> ion_states;
    SpinQuantum atom_state;
    std::vector<ExchangeChannel> channels;  // only channels with a product state

    // True when an un-suppressed exchange channel leaves ion state `from`.
    bool se_allowed(int ion_from) const;
    const ExchangeChannel* se_channel(int ion_from) const;
};

ChannelRuleSet build_rule_set(const std::vector<SpinQuantum>& ion_states,
                              const SpinQuantum& atom_state, int atom_max_twice_f);

// --- N-level master equation ----------------------------------------------

struct RateEntry {
    int from = 0;
    int to = 0;
    double value = 0.0;  // rate of from -> to, >= 0
    RateKind kind = RateKind::spin_relaxation;
};

// Transition-rate matrix with tagged off-diagonal entries. The generator M
// has M(i,j) = rate(j->i) for i != j and column sums exactly zero.
class RateMatrix {
  public:
    RateMatrix(std::vector<std::string> labels, std::vector<RateEntry> entries);

    int n_states() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::vector<RateEntry>& entries() const { return entries_; }
    double rate(int from, int to) const;

    // Generator with column sums zero; built once, immutable.
    const Eigen::MatrixXd& generator() const { return generator_; }

    std::string to_json() const;
    static RateMatrix from_json(const std::string& text);

  private:
    std::vector<std::string> labels_;
    std::vector<RateEntry> entries_;
    Eigen::MatrixXd generator_;
};

struct SpinPopulation {
    Eigen::VectorXd p;
    double time = 0.0;  // units of t_L

    void validate() const;  // entries in [0,1], sum 1 within 1e-12
};

// exp(M t) p0 via scaling and squaring. Output is renormalized and clamped
// against -1e-12 round-off undershoot.
SpinPopulation n_level_evolution(const RateMatrix& m, const SpinPopulation& p0, double t);

// Unique stationary distribution. Reducible generators with several closed
// communicating classes have no unique answer; the error names them.
SpinPopulation n_level_steady_state(const RateMatrix& m);

// Dense matrix exponential (scaling and squaring, Pade 13). Exposed for
// tests; n_level_evolution is the intended entry point.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a);

// --- Four-level hyperfine model --------------------------------------------

// Rate parameterization of the {|1,-1>, |1,0>, |1,1>, |0,0>} manifold:
// transfer within F=1 through |1,0>, a shared decay of every |1,m> into
// |0,0>, and pumping back out of |0,0> when the bath can release
// hyperfine energy. State order: |1,-1>, |1,0>, |1,1>, |0,0>.
struct FourLevelRates {
    double transfer_0_to_plus = 0.0;   // |1,0> -> |1,+1>
    double transfer_plus_to_0 = 0.0;
    double transfer_0_to_minus = 0.0;  // |1,0> -> |1,-1>
    double transfer_minus_to_0 = 0.0;
    double decay_to_f0 = 0.0;          // each |1,m> -> |0,0>
    double pump_from_f0 = 0.0;         // |0,0> -> F=1, split evenly

    RateMatrix rate_matrix() const;

    // Pump rate that pins the stationary F=1 population sum to p1.
    static FourLevelRates with_steady_p1(const FourLevelRates& base, double p1);
};

inline constexpr int four_level_minus = 0;
inline constexpr int four_level_zero = 1;
inline constexpr int four_level_plus = 2;
inline constexpr int four_level_f0 = 3;

std::vector<std::string> four_level_labels();

// Population curves of all four states from an initial |1,0> preparation.
std::vector<SpinPopulation> two_timescale_fit_model(const FourLevelRates& rates,
                                                    const std::vector<double>& times);

// Magnitudes of the nonzero relaxation eigenvalues of the generator,
// sorted ascending; two distinct entries signal two-timescale decay.
std::vector<double> relaxation_eigenvalues(const RateMatrix& m);

}  // namespace ionbath
