#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ionbath/detection.hpp"
#include "ionbath/rng.hpp"

using namespace ionbath;

TEST_CASE("forward model") {
    SUBCASE("ideal detection is the identity") {
        const DetectionModel ideal = detection_presets::ideal();
        for (double p : {0.0, 0.25, 0.7, 1.0})
            CHECK(forward_model(p, ideal) == doctest::Approx(p).epsilon(1e-15));
    }

    SUBCASE("clock-qubit preset endpoints") {
        const DetectionModel model = detection_presets::yb171_hyperfine();
        CHECK(forward_model(1.0, model) == doctest::Approx(0.98).epsilon(1e-15));
        CHECK(forward_model(0.0, model) == doctest::Approx(0.07).epsilon(1e-15));
    }

    SUBCASE("Zeeman-qubit preset endpoints") {
        const DetectionModel model = detection_presets::yb174_f2_bath();
        CHECK(forward_model(0.0, model) == doctest::Approx(0.03).epsilon(1e-15));
        CHECK(forward_model(1.0, model) == doctest::Approx(0.81).epsilon(1e-15));
    }

    SUBCASE("affine and strictly increasing") {
        const DetectionModel model = detection_presets::yb174_f1_bath();
        double prev = forward_model(0.0, model);
        for (double p = 0.05; p <= 1.0; p += 0.05) {
            const double value = forward_model(p, model);
            CHECK(value > prev);
            prev = value;
        }
        const double mid = forward_model(0.5, model);
        CHECK(mid == doctest::Approx((forward_model(0.0, model) +
                                      forward_model(1.0, model)) /
                                     2.0)
                         .epsilon(1e-14));
    }

    SUBCASE("domain checks") {
        const DetectionModel model = detection_presets::yb171_hyperfine();
        CHECK_THROWS_AS(forward_model(-0.01, model), std::domain_error);
        CHECK_THROWS_AS(forward_model(1.01, model), std::domain_error);
    }
}

TEST_CASE("efficiency correction inverse") {
    SUBCASE("round trip to 1e-12 over random models") {
        Rng rng(2101);
        for (int i = 0; i < 1000; ++i) {
            DetectionModel model;
            model.eta_dark_given_up = 0.3 * rng.uniform();
            model.eta_dark_given_down = model.eta_dark_given_up + 0.1 + 0.6 * rng.uniform();
            const double p = rng.uniform();
            const CorrectedProbability back = invert(forward_model(p, model), model);
            CHECK(std::abs(back.value - p) < 1e-12);
            CHECK_FALSE(back.out_of_range);
        }
    }

    SUBCASE("pure-bright limit") {
        const DetectionModel model = detection_presets::yb171_hyperfine();
        CHECK(invert(model.eta_dark_given_up, model).value == doctest::Approx(0.0));
    }

    SUBCASE("out-of-range observations are clamped with the raw value kept") {
        const DetectionModel model = detection_presets::yb174_f2_bath();
        const CorrectedProbability low = invert(0.01, model);  // below eta_up = 0.03
        CHECK(low.out_of_range);
        CHECK(low.value == 0.0);
        CHECK(low.raw < 0.0);
        const CorrectedProbability high = invert(0.9, model);  // above eta_down = 0.81
        CHECK(high.out_of_range);
        CHECK(high.value == 1.0);
        CHECK(high.raw > 1.0);
    }

    SUBCASE("degenerate model is not invertible") {
        DetectionModel flat;
        flat.eta_dark_given_down = 0.5;
        flat.eta_dark_given_up = 0.5;
        CHECK_THROWS_AS(invert(0.4, flat), std::domain_error);
    }
}

TEST_CASE("Wilson intervals") {
    SUBCASE("zero successes anchor the interval at zero") {
        const Interval iv = wilson_interval({500, 0}, 1.0);
        CHECK(iv.low == 0.0);
        CHECK(iv.high > 0.0);
    }

    SUBCASE("reference half width at 3000 trials") {
        const Interval iv = wilson_interval({3000, 1500}, 1.0);
        CHECK(iv.half_width() == doctest::Approx(0.009128).epsilon(2e-3));
        // Close to the naive binomial error sqrt(0.25/3000).
        CHECK(std::abs(iv.half_width() - std::sqrt(0.25 / 3000.0)) < 2e-5);
    }

    SUBCASE("mirror symmetry about one half") {
        for (long k : {0L, 100L, 700L, 1500L}) {
            const Interval a = wilson_interval({3000, k}, 1.0);
            const Interval b = wilson_interval({3000, 3000 - k}, 1.0);
            CHECK(a.low == doctest::Approx(1.0 - b.high).epsilon(1e-12));
            CHECK(a.high == doctest::Approx(1.0 - b.low).epsilon(1e-12));
        }
    }

    SUBCASE("one-sigma coverage over synthetic draws") {
        Rng rng(424242);
        const double p_true = 0.3;
        const long n = 3000;
        int covered = 0;
        const int reps = 10000;
        for (int r = 0; r < reps; ++r) {
            const long k = rng.binomial(n, p_true);
            const Interval iv = wilson_interval({n, k}, 1.0);
            if (iv.low <= p_true && p_true <= iv.high) ++covered;
        }
        const double coverage = static_cast<double>(covered) / reps;
        CHECK(coverage > 0.66);
        CHECK(coverage < 0.71);
    }

    SUBCASE("confidence-level entry point") {
        const Interval one_sigma = wilson_interval({2000, 600}, 1.0);
        const Interval via_level = binomial_interval({2000, 600}, 0.682689492137086);
        CHECK(one_sigma.low == doctest::Approx(via_level.low).epsilon(1e-9));
        CHECK(one_sigma.high == doctest::Approx(via_level.high).epsilon(1e-9));
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(wilson_interval({0, 0}, 1.0), std::domain_error);
        CHECK_THROWS_AS(wilson_interval({10, 11}, 1.0), std::domain_error);
        CHECK_THROWS_AS(wilson_interval({10, 5}, 0.0), std::domain_error);
        CHECK_THROWS_AS(binomial_interval({10, 5}, 1.5), std::domain_error);
    }
}

TEST_CASE("normal quantile") {
    CHECK(z_for_confidence(0.682689492137086) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(z_for_confidence(0.95) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(z_for_confidence(0.99) == doctest::Approx(2.575829304).epsilon(1e-8));
    CHECK(z_for_confidence(0.999999) == doctest::Approx(4.891638476).epsilon(1e-6));
}

TEST_CASE("error propagation through the correction") {
    SUBCASE("zero eta uncertainty reduces to the scaled binomial error") {
        DetectionModel model = detection_presets::yb174_f2_bath();
        model.sigma_eta_down = 0.0;
        model.sigma_eta_up = 0.0;
        const CountRecord rec{3000, 1800};
        const CorrectedEstimate est = propagate_correction_error(rec, model);
        const double p_reg = (1800 + 0.5) / 3001.0;
        const double expected =
            std::sqrt(p_reg * (1.0 - p_reg) / 3000.0) / model.contrast();
        CHECK(est.sigma == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("ideal detection returns the raw fraction") {
        const CountRecord rec{1000, 400};
        const CorrectedEstimate est =
            propagate_correction_error(rec, detection_presets::ideal());
        CHECK(est.p_down == doctest::Approx(0.4).epsilon(1e-12));
    }

    SUBCASE("first-order sigma agrees with a resampling oracle within 10%") {
        const DetectionModel model = detection_presets::yb174_f2_bath();  // +-0.01 etas
        const CountRecord rec{3000, 1800};
        const CorrectedEstimate est = propagate_correction_error(rec, model);

        // Monte Carlo resampling oracle: draw counts and eta values, push
        // each through the exact inverse, take the spread.
        Rng rng(6060);
        const double p_obs_true = rec.dark_fraction();
        const int reps = 60000;
        double sum = 0.0, sumsq = 0.0;
        for (int r = 0; r < reps; ++r) {
            const double p_obs =
                static_cast<double>(rng.binomial(rec.n_trials, p_obs_true)) /
                static_cast<double>(rec.n_trials);
            DetectionModel sampled = model;
            sampled.eta_dark_given_down += model.sigma_eta_down * rng.normal();
            sampled.eta_dark_given_up += model.sigma_eta_up * rng.normal();
            const double value =
                (p_obs - sampled.eta_dark_given_up) / sampled.contrast();
            sum += value;
            sumsq += value * value;
        }
        const double mean = sum / reps;
        const double sigma_mc = std::sqrt(sumsq / reps - mean * mean);
        CHECK(std::abs(est.sigma / sigma_mc - 1.0) < 0.10);
    }
}

TEST_CASE("detection presets") {
    CHECK_NOTHROW(detection_presets::by_name("ideal").validate());
    CHECK_NOTHROW(detection_presets::by_name("yb174_f2_bath").validate());
    CHECK_NOTHROW(detection_presets::by_name("yb174_f1_bath").validate());
    CHECK_NOTHROW(detection_presets::by_name("yb171_hyperfine").validate());
    CHECK_THROWS_AS(detection_presets::by_name("bogus"), std::invalid_argument);

    // One-sided quoted uncertainty handled as a half-normal magnitude.
    CHECK(detection_presets::yb174_f1_bath().eta_dark_given_up == 0.0);
    CHECK(detection_presets::yb174_f1_bath().sigma_eta_up == doctest::Approx(0.01));
}
