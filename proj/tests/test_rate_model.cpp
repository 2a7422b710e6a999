#include <doctest.h>

#include <cmath>

#include "ionbath/rate_model.hpp"
#include "ionbath/rng.hpp"
#include "ode_oracle.hpp"

using namespace ionbath;

namespace {

RateMatrix random_generator(int n, Rng& rng, double max_rate = 1.0) {
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("s" + std::to_string(i));
    std::vector<RateEntry> entries;
    for (int from = 0; from < n; ++from)
        for (int to = 0; to < n; ++to)
            if (from != to)
                entries.push_back({from, to, max_rate * (0.05 + 0.95 * rng.uniform()),
                                   rng.bernoulli(0.5) ? RateKind::spin_exchange
                                                      : RateKind::spin_relaxation});
    return RateMatrix(std::move(labels), std::move(entries));
}

SpinPopulation make_population(std::initializer_list<double> values) {
    SpinPopulation p;
    p.p = Eigen::VectorXd(static_cast<int>(values.size()));
    int i = 0;
    for (double v : values) p.p(i++) = v;
    return p;
}

}  // namespace

TEST_CASE("two-level evolution closed form") {
    TwoLevelRates rates;
    rates.down_se = 0.0872;
    rates.down_sr = 0.1564;
    rates.up_sr = 0.1564;

    SUBCASE("initial condition") {
        CHECK(two_level_evolution(0.3, rates, 0.0) == doctest::Approx(0.3).epsilon(1e-15));
    }

    SUBCASE("symmetric steady state") {
        TwoLevelRates sym;
        sym.up_sr = 0.2;
        sym.down_sr = 0.2;
        CHECK(two_level_evolution(1.0, sym, 1e6) == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("measured steady state of the polarized-bath qubit") {
        TwoLevelRates measured;
        measured.up_sr = 0.391;   // out of |up>, T1 units
        measured.down_se = 0.609;  // out of |down>
        CHECK(two_level_evolution(1.0, measured, 1e9) ==
              doctest::Approx(0.609).epsilon(1e-12));
        CHECK(two_level_steady_state(measured) == doctest::Approx(0.609).epsilon(1e-12));
    }

    SUBCASE("frozen dynamics returns the initial value") {
        TwoLevelRates zero;
        CHECK(two_level_evolution(0.7, zero, 5.0) == 0.7);
        CHECK_THROWS_AS(two_level_steady_state(zero), std::domain_error);
    }

    SUBCASE("absorbing upper state") {
        TwoLevelRates absorbing;
        absorbing.down_se = 0.5;
        CHECK(two_level_steady_state(absorbing) == doctest::Approx(1.0).epsilon(1e-15));
    }

    SUBCASE("monotone relaxation toward the steady state") {
        Rng rng(81);
        for (int trial = 0; trial < 200; ++trial) {
            TwoLevelRates r;
            r.up_se = rng.uniform();
            r.up_sr = rng.uniform();
            r.down_se = rng.uniform();
            r.down_sr = rng.uniform();
            const double p0 = rng.uniform();
            const double p_inf = two_level_steady_state(r);
            double prev = std::abs(p0 - p_inf);
            for (double t = 0.1; t < 12.0; t += 0.35) {
                const double d = std::abs(two_level_evolution(p0, r, t) - p_inf);
                CHECK(d <= prev + 1e-12);
                prev = d;
            }
        }
    }

    SUBCASE("domain errors") {
        CHECK_THROWS_AS(two_level_evolution(-0.1, rates, 1.0), std::domain_error);
        CHECK_THROWS_AS(two_level_evolution(0.5, rates, -1.0), std::domain_error);
    }
}

TEST_CASE("rate decomposition for a stretched bath") {
    SUBCASE("reference values") {
        const TwoLevelRates rates = decompose_rates(2.50, 0.609, true);
        CHECK(rates.up_se == 0.0);
        CHECK(rates.down_se * 2.50 == doctest::Approx(2.0 * 0.609 - 1.0).epsilon(1e-12));
        CHECK(rates.up_sr * 2.50 == doctest::Approx(1.0 - 0.609).epsilon(1e-12));
        CHECK(rates.down_sr == rates.up_sr);
        // Matches the quoted decomposition within its errors.
        CHECK(std::abs(rates.down_se * 2.50 - 0.22) < 0.03);
        CHECK(std::abs(rates.up_sr * 2.50 - 0.39) < 0.02);
    }

    SUBCASE("recomposition is the identity") {
        Rng rng(4133);
        for (int i = 0; i < 1000; ++i) {
            const double t1 = 0.1 + 10.0 * rng.uniform();
            const double p_inf = 0.5 + 0.5 * rng.uniform();
            const TwoLevelRates rates = decompose_rates(t1, p_inf, true);
            CHECK(rates.t1() == doctest::Approx(t1).epsilon(1e-12));
            CHECK(two_level_steady_state(rates) == doctest::Approx(p_inf).epsilon(1e-12));
        }
    }

    SUBCASE("pure exchange at full polarization") {
        const TwoLevelRates rates = decompose_rates(2.0, 1.0, true);
        CHECK(rates.up_sr == 0.0);
        CHECK(rates.down_sr == 0.0);
        CHECK(rates.down_se == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("pure relaxation at the mixed steady state") {
        const TwoLevelRates rates = decompose_rates(2.0, 0.5, true);
        CHECK(rates.down_se == doctest::Approx(0.0));
        CHECK(rates.up_sr == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("inconsistent data is rejected, not clamped") {
        CHECK_THROWS_AS(decompose_rates(2.0, 0.49, true), std::invalid_argument);
        CHECK_THROWS_AS(decompose_rates(2.0, 0.7, false), std::invalid_argument);
        CHECK_THROWS_AS(decompose_rates(-1.0, 0.7, true), std::domain_error);
    }
}

TEST_CASE("exchange selection rules") {
    const std::vector<SpinQuantum> zeeman{{1, 1}, {1, -1}};  // |up>, |down>

    SUBCASE("doubly polarized pair is protected") {
        const ChannelRuleSet rules = build_rule_set(zeeman, SpinQuantum{4, 4}, 4);
        CHECK_FALSE(rules.se_allowed(0));
        CHECK(rules.se_channel(0) == nullptr);  // no product state at all
        CHECK(rules.se_allowed(1));
        CHECK(rules.se_channel(1)->atom_to == SpinQuantum{4, 2});  // |2,1>
    }

    SUBCASE("mirrored stretched state") {
        const ChannelRuleSet rules = build_rule_set(zeeman, SpinQuantum{4, -4}, 4);
        CHECK(rules.se_allowed(0));
        CHECK_FALSE(rules.se_allowed(1));
    }

    SUBCASE("upper-manifold promotion is suppressed") {
        const ChannelRuleSet rules = build_rule_set(zeeman, SpinQuantum{2, 2}, 4);
        // |up> -> |down> would push the atom from |1,1> to |2,2>.
        CHECK_FALSE(rules.se_allowed(0));
        REQUIRE(rules.se_channel(0) != nullptr);
        CHECK(rules.se_channel(0)->suppressed);
        CHECK(rules.se_channel(0)->atom_to == SpinQuantum{4, 4});
        // |down> -> |up> stays inside F=1.
        CHECK(rules.se_allowed(1));
        CHECK(rules.se_channel(1)->atom_to == SpinQuantum{2, 0});
    }

    SUBCASE("allowed channels conserve the total projection") {
        for (int twice_mf : {-4, -2, 0, 2, 4}) {
            const SpinQuantum atom{4, twice_mf};
            const ChannelRuleSet rules = build_rule_set(zeeman, atom, 4);
            for (const auto& channel : rules.channels) {
                const int before =
                    rules.ion_states[channel.ion_from].twice_mf + atom.twice_mf;
                const int after = rules.ion_states[channel.ion_to].twice_mf +
                                  channel.atom_to.twice_mf;
                CHECK(before == after);
            }
        }
    }

    SUBCASE("invalid quantum numbers") {
        CHECK_THROWS_AS(build_rule_set(zeeman, SpinQuantum{2, 4}, 4), std::domain_error);
        CHECK_THROWS_AS(build_rule_set({{1, 3}, {1, -1}}, SpinQuantum{4, 4}, 4),
                        std::domain_error);
        CHECK_THROWS_AS(build_rule_set(zeeman, SpinQuantum{6, 0}, 4), std::domain_error);
    }
}

TEST_CASE("rate matrix construction and serialization") {
    SUBCASE("generator columns sum to zero") {
        Rng rng(90);
        for (int n : {2, 3, 4, 6, 8}) {
            const RateMatrix m = random_generator(n, rng);
            for (int j = 0; j < n; ++j)
                CHECK(std::abs(m.generator().col(j).sum()) < 1e-14);
            for (int j = 0; j < n; ++j) CHECK(m.generator()(j, j) <= 0.0);
        }
    }

    SUBCASE("negative rates and bad indices are rejected") {
        CHECK_THROWS_AS(RateMatrix({"a", "b"}, {{0, 1, -0.5, RateKind::spin_exchange}}),
                        std::invalid_argument);
        CHECK_THROWS_AS(RateMatrix({"a", "b"}, {{0, 2, 0.5, RateKind::spin_exchange}}),
                        std::invalid_argument);
        CHECK_THROWS_AS(RateMatrix({"a", "b"}, {{1, 1, 0.5, RateKind::spin_exchange}}),
                        std::invalid_argument);
    }

    SUBCASE("JSON round trip is bit exact") {
        Rng rng(91);
        for (int trial = 0; trial < 20; ++trial) {
            const RateMatrix m = random_generator(4, rng, 3.7);
            const RateMatrix back = RateMatrix::from_json(m.to_json());
            REQUIRE(back.labels() == m.labels());
            REQUIRE(back.entries().size() == m.entries().size());
            for (std::size_t i = 0; i < m.entries().size(); ++i) {
                CHECK(back.entries()[i].value == m.entries()[i].value);  // bitwise
                CHECK(back.entries()[i].from == m.entries()[i].from);
                CHECK(back.entries()[i].to == m.entries()[i].to);
                CHECK(back.entries()[i].kind == m.entries()[i].kind);
            }
        }
    }
}

TEST_CASE("n-level evolution") {
    SUBCASE("zero time is the identity") {
        Rng rng(17);
        const RateMatrix m = random_generator(4, rng);
        const SpinPopulation p0 = make_population({0.1, 0.2, 0.3, 0.4});
        const SpinPopulation p = n_level_evolution(m, p0, 0.0);
        for (int i = 0; i < 4; ++i) CHECK(p.p(i) == doctest::Approx(p0.p(i)).epsilon(1e-14));
    }

    SUBCASE("all-to-all equal rates mix to uniform") {
        std::vector<RateEntry> entries;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) entries.push_back({i, j, 0.5, RateKind::spin_relaxation});
        const RateMatrix m({"a", "b", "c", "d"}, entries);
        const SpinPopulation p = n_level_evolution(m, make_population({1, 0, 0, 0}), 50.0);
        for (int i = 0; i < 4; ++i) CHECK(p.p(i) == doctest::Approx(0.25).epsilon(1e-9));
    }

    SUBCASE("two-state embedding reproduces the closed form to 1e-9") {
        Rng rng(23);
        for (int trial = 0; trial < 50; ++trial) {
            TwoLevelRates rates;
            rates.up_se = rng.uniform();
            rates.up_sr = rng.uniform();
            rates.down_se = rng.uniform();
            rates.down_sr = rng.uniform();
            const RateMatrix m({"up", "down"},
                               {{0, 1, rates.out_of_up(), RateKind::spin_relaxation},
                                {1, 0, rates.out_of_down(), RateKind::spin_relaxation}});
            const double p0 = rng.uniform();
            for (double t : {0.0, 0.3, 1.0, 2.7, 9.0, 40.0}) {
                const SpinPopulation p =
                    n_level_evolution(m, make_population({p0, 1.0 - p0}), t);
                CHECK(std::abs(p.p(0) - two_level_evolution(p0, rates, t)) < 1e-9);
            }
        }
    }

    SUBCASE("agrees with the adaptive integrator oracle to 1e-9") {
        Rng rng(29);
        for (int trial = 0; trial < 10; ++trial) {
            const RateMatrix m = random_generator(4, rng);
            Eigen::VectorXd p0(4);
            p0 << 0.4, 0.3, 0.2, 0.1;
            for (double t : {0.2, 1.0, 5.0, 20.0}) {
                const SpinPopulation prop = n_level_evolution(m, make_population({0.4, 0.3, 0.2, 0.1}), t);
                const Eigen::VectorXd oracle =
                    test_oracle::integrate_master_equation(m.generator(), p0, t);
                for (int i = 0; i < 4; ++i) CHECK(std::abs(prop.p(i) - oracle(i)) < 1e-9);
            }
        }
    }

    SUBCASE("semigroup property") {
        Rng rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            const RateMatrix m = random_generator(5, rng);
            const SpinPopulation p0 = make_population({0.2, 0.2, 0.2, 0.2, 0.2});
            const double t1 = 3.0 * rng.uniform(), t2 = 3.0 * rng.uniform();
            const SpinPopulation one_shot = n_level_evolution(m, p0, t1 + t2);
            const SpinPopulation two_step =
                n_level_evolution(m, n_level_evolution(m, p0, t1), t2);
            for (int i = 0; i < 5; ++i)
                CHECK(std::abs(one_shot.p(i) - two_step.p(i)) < 1e-9);
        }
    }

    SUBCASE("raw matrix exponential conserves probability to 1e-12") {
        // Checked on the exponential itself, before the propagation wrapper
        // renormalizes: columns of exp(M t) must each sum to one.
        Rng rng(37);
        const RateMatrix m = random_generator(4, rng);
        for (double t : {0.01, 0.1, 1.0, 10.0, 100.0}) {
            const Eigen::MatrixXd propagator = matrix_exponential(m.generator() * t);
            for (int j = 0; j < 4; ++j)
                CHECK(std::abs(propagator.col(j).sum() - 1.0) < 1e-12);
            CHECK(propagator.minCoeff() > -1e-12);
        }
    }

    SUBCASE("nonnegativity and normalization over a log time grid") {
        Rng rng(41);
        const RateMatrix m = random_generator(4, rng);
        const SpinPopulation p0 = make_population({1, 0, 0, 0});
        for (double t = 0.01; t <= 100.0; t *= 1.6) {
            const SpinPopulation p = n_level_evolution(m, p0, t);
            CHECK(p.p.minCoeff() >= 0.0);
            CHECK(std::abs(p.p.sum() - 1.0) < 1e-12);
        }
    }

    SUBCASE("invalid inputs") {
        Rng rng(43);
        const RateMatrix m = random_generator(3, rng);
        CHECK_THROWS_AS(n_level_evolution(m, make_population({0.5, 0.5}), 1.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(n_level_evolution(m, make_population({0.6, 0.6, 0.6}), 1.0),
                        std::domain_error);
        CHECK_THROWS_AS(n_level_evolution(m, make_population({0.4, 0.3, 0.3}), -1.0),
                        std::domain_error);
    }
}

TEST_CASE("n-level steady state") {
    SUBCASE("symmetric ring relaxes to uniform") {
        std::vector<RateEntry> entries;
        for (int i = 0; i < 4; ++i) {
            entries.push_back({i, (i + 1) % 4, 0.7, RateKind::spin_relaxation});
            entries.push_back({(i + 1) % 4, i, 0.7, RateKind::spin_relaxation});
        }
        const RateMatrix ring({"a", "b", "c", "d"}, entries);
        const SpinPopulation steady = n_level_steady_state(ring);
        for (int i = 0; i < 4; ++i) CHECK(steady.p(i) == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("single absorbing state") {
        const RateMatrix m({"a", "b", "c"},
                           {{0, 1, 0.3, RateKind::spin_relaxation},
                            {1, 2, 0.4, RateKind::spin_relaxation},
                            {0, 2, 0.1, RateKind::spin_exchange}});
        const SpinPopulation steady = n_level_steady_state(m);
        CHECK(steady.p(2) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("matches the two-level closed form") {
        const RateMatrix m({"up", "down"},
                           {{0, 1, 0.39, RateKind::spin_relaxation},
                            {1, 0, 0.61, RateKind::spin_relaxation}});
        TwoLevelRates rates;
        rates.up_sr = 0.39;
        rates.down_sr = 0.61;
        CHECK(n_level_steady_state(m).p(0) ==
              doctest::Approx(two_level_steady_state(rates)).epsilon(1e-12));
    }

    SUBCASE("evolution converges to the steady state") {
        Rng rng(53);
        const RateMatrix m = random_generator(5, rng);
        const SpinPopulation steady = n_level_steady_state(m);
        const SpinPopulation late =
            n_level_evolution(m, make_population({1, 0, 0, 0, 0}), 200.0);
        for (int i = 0; i < 5; ++i)
            CHECK(late.p(i) == doctest::Approx(steady.p(i)).epsilon(1e-8));
    }

    SUBCASE("two absorbing classes are reported") {
        const RateMatrix m({"a", "b", "c"},
                           {{2, 0, 0.5, RateKind::spin_relaxation},
                            {2, 1, 0.5, RateKind::spin_relaxation}});
        CHECK_THROWS_WITH_AS(n_level_steady_state(m),
                             doctest::Contains("absorbing classes"), std::runtime_error);
    }
}

TEST_CASE("four-level manifold model") {
    FourLevelRates base;
    base.transfer_0_to_plus = 0.5;
    base.transfer_plus_to_0 = 0.5;
    base.transfer_0_to_minus = 0.5;
    base.transfer_minus_to_0 = 0.5;
    base.decay_to_f0 = 0.2;

    SUBCASE("relaxation eigenvalues of the symmetric parameterization") {
        // With symmetric transfer a and shared decay d (no pumping) the
        // nonzero eigenvalue magnitudes are d, a+d and 3a+d.
        const auto eigenvalues = relaxation_eigenvalues(base.rate_matrix());
        REQUIRE(eigenvalues.size() == 3);
        CHECK(eigenvalues[0] == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(eigenvalues[1] == doctest::Approx(0.7).epsilon(1e-9));
        CHECK(eigenvalues[2] == doctest::Approx(1.7).epsilon(1e-9));
    }

    SUBCASE("two well-separated timescales when transfer dominates decay") {
        FourLevelRates fast = base;
        fast.transfer_0_to_plus = fast.transfer_plus_to_0 = 2.0;
        fast.transfer_0_to_minus = fast.transfer_minus_to_0 = 2.0;
        fast.decay_to_f0 = 0.05;
        const auto eigenvalues = relaxation_eigenvalues(fast.rate_matrix());
        REQUIRE(eigenvalues.size() >= 2);
        CHECK(eigenvalues.back() / eigenvalues.front() > 20.0);

        // Qualitative shape: |1,+-1> fill up quickly, then everything
        // drains into |0,0>.
        const auto curves = two_timescale_fit_model(fast, {0.0, 0.4, 90.0});
        CHECK(curves[0].p(four_level_plus) == 0.0);
        CHECK(curves[1].p(four_level_plus) > 0.2);
        CHECK(curves[2].p(four_level_f0) > 0.9);
    }

    SUBCASE("zero transfer collapses the |1,0> decay to one timescale") {
        FourLevelRates pure = base;
        pure.transfer_0_to_plus = pure.transfer_plus_to_0 = 0.0;
        pure.transfer_0_to_minus = pure.transfer_minus_to_0 = 0.0;
        const auto curves =
            two_timescale_fit_model(pure, {0.0, 1.0, 2.0, 3.0, 4.0});
        for (std::size_t i = 1; i < curves.size(); ++i) {
            const double expected = std::exp(-0.2 * curves[i].time);
            CHECK(curves[i].p(four_level_zero) == doctest::Approx(expected).epsilon(1e-9));
        }
        const auto eigenvalues = relaxation_eigenvalues(pure.rate_matrix());
        for (double ev : eigenvalues) CHECK(ev == doctest::Approx(0.2).epsilon(1e-9));
    }

    SUBCASE("steady F=1 occupation pinned by the pump-decay balance") {
        const FourLevelRates pumped = FourLevelRates::with_steady_p1(base, 0.163);
        const SpinPopulation steady = n_level_steady_state(pumped.rate_matrix());
        const double p1 = steady.p(four_level_minus) + steady.p(four_level_zero) +
                          steady.p(four_level_plus);
        CHECK(p1 == doctest::Approx(0.163).epsilon(1e-12));
    }

    SUBCASE("model curves start at the prepared state") {
        const auto curves = two_timescale_fit_model(base, {0.0});
        CHECK(curves[0].p(four_level_zero) == doctest::Approx(1.0));
    }

    SUBCASE("negative rates rejected") {
        FourLevelRates bad = base;
        bad.decay_to_f0 = -0.1;
        CHECK_THROWS_AS(bad.rate_matrix(), std::domain_error);
        CHECK_THROWS_AS(FourLevelRates::with_steady_p1(base, 1.0), std::domain_error);
    }
}
