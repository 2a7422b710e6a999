#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ionbath/config.hpp"
#include "ionbath/constants.hpp"

using namespace ionbath;
namespace units = ionbath::units;

TEST_CASE("default configuration") {
    const RunConfig cfg = RunConfig::defaults();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.ion.isotope_label == "174Yb+");
    CHECK(cfg.bath.spin_state == SpinQuantum{4, 4});

    SUBCASE("collision rates at the default density") {
        CHECK(units::us_from_seconds(cfg.langevin_time_s()) ==
              doctest::Approx(476.0).epsilon(0.01));
    }

    SUBCASE("branching defaults reproduce the reference two-level kinetics") {
        const RateMatrix induced = cfg.branching_config().induced_rate_matrix();
        const SpinPopulation steady = n_level_steady_state(induced);
        CHECK(steady.p(0) == doctest::Approx(0.609).epsilon(2e-3));
        // Total out-rates give T1 = 2.5 t_L.
        const double total = induced.rate(0, 1) + induced.rate(1, 0);
        CHECK(1.0 / total == doctest::Approx(2.5).epsilon(2e-3));
    }

    SUBCASE("epsilon resolves from the bath manifold") {
        CHECK(cfg.epsilon_effective() == 1.0);  // F=2 bath
        RunConfig f1 = cfg;
        f1.bath = presets::rb87(SpinQuantum{2, 2}, 1e18);
        CHECK(f1.epsilon_effective() == 0.0);
        f1.branching.epsilon = 0.3;
        CHECK(f1.epsilon_effective() == 0.3);
    }

    SUBCASE("stretched bath forbids exchange out of the upper state") {
        const BranchingConfig bc = cfg.branching_config();
        for (const auto& channel : bc.channels) {
            if (channel.kind == RateKind::spin_exchange) CHECK(channel.from == 1);
        }
    }
}

TEST_CASE("configuration document round trip") {
    const RunConfig cfg = RunConfig::defaults();
    const std::string text = cfg.to_json_text();
    const RunConfig back = RunConfig::from_json_text(text);
    CHECK(back.config_hash() == cfg.config_hash());
    CHECK(back.seed == cfg.seed);
    CHECK(back.branching.p_se == cfg.branching.p_se);

    SUBCASE("hash is sensitive to the seed") {
        RunConfig reseeded = cfg;
        reseeded.seed += 1;
        CHECK(reseeded.config_hash() != cfg.config_hash());
    }

    SUBCASE("hash is stable across repeated serialization") {
        CHECK(RunConfig::from_json_text(text).to_json_text() == text);
    }
}

TEST_CASE("configuration parsing and validation") {
    SUBCASE("unknown keys are rejected with their path") {
        CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"bogus": 1})"),
                             doctest::Contains("bogus"), ConfigError);
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(R"({"branching": {"p_see": 0.1}})"),
            doctest::Contains("branching.p_see"), ConfigError);
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(R"({"time_grid": {"spacing": "cubic"}})"),
            doctest::Contains("time_grid.spacing"), ConfigError);
    }

    SUBCASE("ion and bath presets by name") {
        const RunConfig cfg = RunConfig::from_json_text(
            R"({"ion": "yb171", "model": "four_level",
                "detection": "yb171_hyperfine",
                "branching": {"initial_state": "1,0"},
                "bath": {"state": "1,-1"}})");
        CHECK(cfg.ion.qubit_kind == QubitKind::hyperfine_clock);
        CHECK(cfg.bath.spin_state == SpinQuantum{2, -2});
        CHECK(cfg.ion.hyperfine_splitting_ghz ==
              doctest::Approx(12.6));
    }

    SUBCASE("model and qubit kind must agree") {
        CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"ion": "yb171"})"),
                             doctest::Contains("model"), ConfigError);
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(R"({"model": "four_level"})"),
            doctest::Contains("model"), ConfigError);
    }

    SUBCASE("field-level diagnostics carry the path") {
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(R"({"bath": {"state": "2,5"}})"),
            doctest::Contains("bath.state"), ConfigError);
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(R"({"bath": {"state": "9,9"}})"),
            doctest::Contains("bath"), ConfigError);
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(R"({"branching": {"p_se": 1.5}})"),
            doctest::Contains("branching.p_se"), ConfigError);
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(R"({"branching": {"p_se": 0.7, "p_sr": 0.7}})"),
            doctest::Contains("branching"), ConfigError);
        CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"ensemble_size": 0})"),
                             doctest::Contains("ensemble_size"), ConfigError);
        CHECK_THROWS_WITH_AS(RunConfig::from_json_text("{nope"),
                             doctest::Contains("document"), ConfigError);
    }

    SUBCASE("detection accepts presets and explicit etas") {
        const RunConfig preset = RunConfig::from_json_text(R"({"detection": "ideal"})");
        CHECK(preset.detection.eta_dark_given_down == 1.0);
        const RunConfig custom = RunConfig::from_json_text(
            R"({"detection": {"eta_dark_down": 0.9, "eta_dark_up": 0.1}})");
        CHECK(custom.detection.eta_dark_given_down == 0.9);
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(
                R"({"detection": {"eta_dark_down": 0.2, "eta_dark_up": 0.5}})"),
            doctest::Contains("detection"), ConfigError);
    }

    SUBCASE("four-level branching probabilities respect the per-collision budget") {
        CHECK_THROWS_WITH_AS(
            RunConfig::from_json_text(
                R"({"ion": "yb171", "model": "four_level",
                    "detection": "yb171_hyperfine",
                    "branching": {"initial_state": "1,0"},
                    "four_level_rates": {"transfer_0_to_plus": 0.6,
                                         "transfer_0_to_minus": 0.5,
                                         "decay_to_f0": 0.3}})"),
            doctest::Contains("four_level_rates"), ConfigError);
    }
}

TEST_CASE("time grids") {
    TimeGridSpec linear;
    linear.t_max_tl = 10.0;
    linear.n_points = 5;
    const auto lin = linear.times_tl();
    REQUIRE(lin.size() == 5);
    CHECK(lin.front() == 0.0);
    CHECK(lin.back() == 10.0);
    CHECK(lin[1] == doctest::Approx(2.5));

    TimeGridSpec log_grid;
    log_grid.t_max_tl = 100.0;
    log_grid.n_points = 8;
    log_grid.spacing = "log";
    const auto lg = log_grid.times_tl();
    REQUIRE(lg.size() == 8);
    CHECK(lg.front() == 0.0);
    CHECK(lg.back() == doctest::Approx(100.0));
    for (std::size_t i = 1; i + 1 < lg.size(); ++i) CHECK(lg[i] < lg[i + 1]);
}

TEST_CASE("initial trajectory state resolution") {
    RunConfig cfg = RunConfig::defaults();
    CHECK(cfg.initial_trajectory_state().spin == 0);
    cfg.branching.initial_state = "down";
    CHECK(cfg.initial_trajectory_state().spin == 1);
    CHECK(cfg.initial_trajectory_state().kinetic_energy_j ==
          doctest::Approx(units::joule_from_mk(20.0)));
}
