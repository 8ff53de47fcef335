#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <fsdde/khbound.hpp>

#include "support/models.hpp"

using namespace fsdde;

namespace {

std::vector<sdde::SolutionPath> solve_paths(const ModelSpec& model, double t, std::size_t n,
                                            std::uint64_t seed) {
    const auto driver = fbm::sample(model.driver_grid(t), model.hurst, n, seed);
    return sdde::solve_batch(model, driver);
}

} // namespace

TEST_CASE("plan_chain block count and scales") {
    // N = ceil(c2 (x-eta0)^2 / t^{2H}) with t^{2H} = 1
    const ModelSpec model =
        testmodels::make_model("1+0.25*tanh(x)", "0.1*sin(x)", "0", 0.0, 0.75, 2.0, 0.5, 32);
    const auto plan = khbound::plan_chain(model, 1.0, 1.0, 0.2, 16.0);
    CHECK(plan.n_blocks == 16);
    CHECK(plan.delta == Catch::Approx(1.0 / 16.0));
    CHECK(plan.sigma_n == Catch::Approx(0.125).epsilon(1e-15)); // (1/16)^{3/4}
    CHECK(plan.waypoints.size() == 17);

    SECTION("waypoint telescoping") {
        double sum = 0.0;
        for (std::size_t n = 1; n < plan.waypoints.size(); ++n)
            sum += plan.waypoints[n] - plan.waypoints[n - 1];
        CHECK(plan.waypoints.front() == model.eta0);
        CHECK(plan.waypoints.back() == Catch::Approx(1.0).margin(1e-15));
        CHECK(sum == Catch::Approx(1.0 - model.eta0).margin(1e-12));
    }
    SECTION("waypoint spacing against the chain scale") {
        // |y_{n+1} - y_n| = chain_scale / sqrt(c2) up to the ceiling of N
        const double dy = std::abs(plan.waypoints[1] - plan.waypoints[0]);
        CHECK(dy <= plan.chain_scale / std::sqrt(plan.c2) * (1.0 + 1e-12));
        if (plan.ok_spacing) CHECK(dy <= plan.c1 * plan.chain_scale * (1.0 + 1e-12));
    }
}

TEST_CASE("maximal feasible c1 solves the half-exponential constraint") {
    const double c1 = khbound::max_feasible_c1(1.0);
    CHECK(c1 == Catch::Approx(std::sqrt(std::log(2.0) / 8.0)).epsilon(1e-15));
    CHECK(c1 == Catch::Approx(0.2944).margin(1e-4));
    CHECK(std::exp(-8.0 * c1 * c1) == Catch::Approx(0.5).margin(1e-12));
    CHECK(khbound::max_feasible_c1(0.75) == Catch::Approx(0.75 * c1).epsilon(1e-15));
}

TEST_CASE("plans violating the ledger are marked infeasible, not rejected") {
    const ModelSpec model = testmodels::standard();
    const auto plan = khbound::plan_chain(model, 1.5, 2.0, 5.0, 30.0); // c1 far too large
    CHECK_FALSE(plan.ok_half_exp);
    CHECK_FALSE(plan.feasible());
    CHECK(plan.n_blocks > 0);
    CHECK_THROWS_AS(khbound::chain_lower_bound(plan), NumericError);
}

TEST_CASE("block width must stay below the delay") {
    const ModelSpec model = testmodels::make_model("1+0.25*tanh(x)", "0.1*sin(x)", "0", 0.0, 0.75,
                                                   4.0, 0.5, 32);
    try {
        khbound::plan_chain(model, 1.6, 0.01, 0.2, 16.0); // N = 1, delta = 1.6 >= r
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("N = 4") != std::string::npos);
    }
}

TEST_CASE("chained bound closed forms") {
    // high ellipticity floor so that small c2 values stay feasible
    const ModelSpec model = testmodels::make_model("3+0.25*tanh(x)", "0.1*sin(x)");
    const double c1 = 0.8;

    SECTION("single-block chain at x = eta0 reduces to c / (4 t^H)") {
        // for t > r a one-block plan always violates the delay constraint,
        // so the N = 1 reduction is checked on the closed form itself
        khbound::ChainPlan plan = khbound::plan_chain(model, 1.5, model.eta0 + 1.0, c1, 4.0);
        plan.x = model.eta0;
        plan.n_blocks = 1;
        const auto bound = khbound::chain_lower_bound(plan);
        const double th = std::pow(1.5, model.hurst);
        CHECK(bound.exact == Catch::Approx(plan.c / (4.0 * th)).epsilon(1e-12));
        CHECK(bound.exact == Catch::Approx(bound.simplified).epsilon(1e-12));
        CHECK(bound.continuous == Catch::Approx(1.0 / (plan.c1 * th)).epsilon(1e-12));
        // the delay-structure error names the smallest N that fixes it
        CHECK_THROWS_AS(khbound::plan_chain(model, 1.5, model.eta0, c1, 4.0), NumericError);
    }
    SECTION("exact dominates simplified whenever the ledger holds") {
        for (double x : {0.5, 1.0, 2.0, 3.5}) {
            const auto plan = khbound::plan_chain(model, 1.5, x, c1, 8.0);
            if (!plan.feasible()) continue;
            const auto bound = khbound::chain_lower_bound(plan);
            CHECK(bound.exact >= bound.simplified * (1.0 - 1e-12));
        }
    }
    SECTION("doubling c2 weakens the bound monotonically") {
        std::vector<double> simplified, continuous;
        for (double c2 : {4.0, 8.0, 16.0, 32.0}) {
            const auto plan = khbound::plan_chain(model, 1.5, 1.0, c1, c2);
            REQUIRE(plan.feasible());
            const auto bound = khbound::chain_lower_bound(plan);
            simplified.push_back(bound.simplified);
            continuous.push_back(bound.continuous);
        }
        for (std::size_t i = 0; i + 1 < simplified.size(); ++i) {
            CHECK(simplified[i + 1] < simplified[i]);
            CHECK(continuous[i + 1] < continuous[i]);
        }
    }
}

TEST_CASE("aligned solver grids for chain blocks") {
    CHECK(khbound::aligned_steps_per_delay(1.5, 1.0, 8, 16) == 16);   // 16*1.5/8 = 3
    CHECK(khbound::aligned_steps_per_delay(1.5, 1.0, 8, 17) == 32);   // next multiple of 16
    CHECK(khbound::aligned_steps_per_delay(1.5, 1.0, 64, 64) == 128); // 64*1.5/64 = 1.5
    CHECK(khbound::aligned_steps_per_delay(2.0, 1.0, 8, 64) == 64);
}

TEST_CASE("conditional variance bracket on blocks") {
    const double t = 1.5;
    const std::size_t n_blocks = 8;

    SECTION("constant sigma sits mid-bracket exactly") {
        const ModelSpec model = testmodels::make_model("2", "0.1*sin(x)");
        const auto plan = khbound::plan_chain_with_blocks(model, t, n_blocks, 0.2, 26.0);
        const Grid block_grid = Grid::uniform(0.0, plan.delta, model.steps_per_block * 3 / 16);
        const auto w = hspace::cell_weights(block_grid, model.hurst);
        const auto paths = solve_paths(model, t, 10, 808);
        const auto res = khbound::j1_variance_bracket(paths, plan, w);
        CHECK(res.report.pass);
        const double expected = 4.0 * plan.sigma_n * plan.sigma_n;
        for (const auto& b : res.blocks) {
            CHECK(b.v_min == Catch::Approx(expected).epsilon(1e-12));
            CHECK(b.v_max == Catch::Approx(expected).epsilon(1e-12));
        }
    }
    SECTION("standard model: zero violations and a tight bracket") {
        const ModelSpec model = testmodels::standard();
        const auto plan = khbound::plan_chain_with_blocks(model, t, 32, 0.2, 26.0);
        const Grid block_grid = Grid::uniform(0.0, plan.delta, 3); // 64*1.5/32
        const auto w = hspace::cell_weights(block_grid, model.hurst);
        const auto paths = solve_paths(model, t, 1000, 809);
        const auto res = khbound::j1_variance_bracket(paths, plan, w);
        CHECK(res.report.pass);
        CHECK(res.report.n_violations == 0);
        // empirical range oracle: the max normalised variance approaches the
        // squared sigma range actually visited
        CHECK(res.v_over_sigma2_max ==
              Catch::Approx(res.sigma2_visited_max).epsilon(0.02));
    }
}

TEST_CASE("drift remainder smallness and refinement") {
    const double t = 1.5;

    SECTION("no drift: every remainder vanishes") {
        const ModelSpec model = testmodels::make_model("1+0.25*tanh(x)", "0");
        const auto plan = khbound::plan_chain_with_blocks(model, t, 8, 0.2, 26.0);
        const auto paths = solve_paths(model, t, 10, 123);
        const auto res = khbound::rn_smallness(paths, plan);
        CHECK(res.report.pass);
        CHECK(res.max_abs_rn == 0.0);
    }
    SECTION("constant drift: R_n = beta * Delta exactly") {
        const ModelSpec model = testmodels::make_model("1+0.25*tanh(x)", "0.7");
        const auto plan = khbound::plan_chain_with_blocks(model, t, 8, 0.2, 26.0);
        const auto paths = solve_paths(model, t, 5, 124);
        const auto res = khbound::rn_smallness(paths, plan);
        CHECK(res.report.pass);
        CHECK(res.max_abs_rn == Catch::Approx(0.7 * plan.delta).epsilon(1e-12));
    }
    SECTION("refinement slope of max |R_n| is one power of Delta") {
        const ModelSpec base = testmodels::standard();
        std::vector<double> log_delta, log_max;
        for (std::size_t n_blocks : {8u, 16u, 32u, 64u}) {
            ModelSpec model = base;
            model.steps_per_block =
                khbound::aligned_steps_per_delay(t, base.delay, n_blocks, base.steps_per_block);
            const auto plan = khbound::plan_chain_with_blocks(model, t, n_blocks, 0.2, 26.0);
            const auto paths = solve_paths(model, t, 200, 125);
            const auto res = khbound::rn_smallness(paths, plan);
            CHECK(res.report.pass);
            log_delta.push_back(std::log(plan.delta));
            log_max.push_back(std::log(res.max_abs_rn));
        }
        const auto fit = stats::linear_fit(log_delta, log_max);
        CHECK(fit.slope >= 0.9);
        CHECK(fit.slope <= 1.1);
    }
}

TEST_CASE("late-regime positivity, feasibility and shape") {
    SECTION("gaussian control model") {
        const ModelSpec model = testmodels::gaussian_reduction();
        khbound::LateBoundOptions opts;
        opts.expect_gaussian_shape = true;
        const double th = std::pow(1.5, model.hurst);
        const auto res = khbound::verify_late_bound(model, 1.5, model.eta0 - 3.0 * th,
                                                    model.eta0 + 3.0 * th, 61, 20000, 2110, opts);
        CHECK(res.report.pass);
        CHECK(res.feasibility_nonempty);
        CHECK(res.shape.r2 >= 0.9);
        // fitted exponent against the empirical variance
        CHECK(res.shape.slope ==
              Catch::Approx(res.shape_expected_slope).epsilon(0.25));
    }
    SECTION("standard model passes and reports support exclusions out wide") {
        const ModelSpec model = testmodels::standard();
        const auto res = khbound::verify_late_bound(model, 1.5, model.eta0 - 3.0, model.eta0 + 3.0,
                                                    41, 20000, 2111);
        CHECK(res.report.pass);
        CHECK(res.feasibility_nonempty);

        const auto wide = khbound::verify_late_bound(model, 1.5, model.eta0 - 40.0,
                                                     model.eta0 + 40.0, 41, 1000, 2112);
        CHECK(wide.n_excluded > 0);
        CHECK_FALSE(wide.report.notes.empty());
    }
    SECTION("preconditions") {
        const ModelSpec model = testmodels::standard();
        CHECK_THROWS_AS(khbound::verify_late_bound(model, 0.5, -1.0, 1.0, 11, 1000, 1),
                        ConfigError);
    }
}
