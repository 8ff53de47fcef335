#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <fsdde/nvdensity.hpp>
#include <fsdde/rng.hpp>
#include <fsdde/stats.hpp>

#include "support/models.hpp"

using namespace fsdde;

TEST_CASE("gauss-legendre rule on (0,1)") {
    for (std::size_t n : {2u, 8u, 16u}) {
        const auto q = stats::gauss_legendre_01(n);
        double mass = 0.0, cubic = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(q.nodes[i] > 0.0);
            CHECK(q.nodes[i] < 1.0);
            if (i) CHECK(q.nodes[i] > q.nodes[i - 1]);
            mass += q.weights[i];
            cubic += q.weights[i] * q.nodes[i] * q.nodes[i] * q.nodes[i];
        }
        CHECK(mass == Catch::Approx(1.0).epsilon(1e-14));
        CHECK(cubic == Catch::Approx(0.25).epsilon(1e-13)); // exact for degree 2n-1 >= 3
    }
}

TEST_CASE("gaussian reduction: g_F is exactly t^{2H}") {
    const ModelSpec model = testmodels::gaussian_reduction();
    const double t = 0.5;
    const auto gf = nvdensity::estimate_gf(model, t, 2000, 8, 2025);
    const double expected = std::pow(t, 2.0 * model.hurst);
    for (std::size_t i = 0; i < gf.bin_centers.size(); ++i) {
        if (gf.counts[i] < 200) continue;
        CHECK(gf.gf_values[i] == Catch::Approx(expected).epsilon(0.03));
        CHECK(gf.gf_values[i] == Catch::Approx(expected).epsilon(1e-10)); // constant Phi: exact
    }
}

TEST_CASE("g_F bracket holds deterministically for the standard model") {
    const ModelSpec model = testmodels::standard();
    const double t = 0.5;
    const auto gf = nvdensity::estimate_gf(model, t, 1500, 8, 99);
    const double t2h = std::pow(t, 2.0 * model.hurst);
    const double mr = model.drift_slope_bound() * model.delay;
    const double lo = model.lambda() * model.lambda() * std::exp(-2.0 * mr) * t2h;
    const double hi = model.lambda_cap() * model.lambda_cap() * std::exp(2.0 * mr) * t2h;
    for (std::size_t i = 0; i < gf.bin_centers.size(); ++i) {
        CHECK(gf.gf_values[i] > 0.0);
        CHECK(gf.gf_values[i] >= lo * (1.0 - 1e-12));
        CHECK(gf.gf_values[i] <= hi * (1.0 + 1e-12));
    }
    // per-replicate values obey the same bracket (positive kernel, pointwise
    // brackets on Phi, unit-mass theta quadrature)
    for (double g : gf.sample_g) {
        CHECK(g >= lo * (1.0 - 1e-12));
        CHECK(g <= hi * (1.0 + 1e-12));
    }
}

TEST_CASE("theta-degenerate node: the self-pairing is the squared norm") {
    const ModelSpec model = testmodels::standard();
    const double t = 0.5;
    const Grid grid = model.driver_grid(t);
    const auto w = hspace::cell_weights(grid, model.hurst);
    const auto driver = fbm::sample(grid, model.hurst, 5, 7);
    const double t2h = std::pow(t, 2.0 * model.hurst);
    const double mr = model.drift_slope_bound() * model.delay;
    for (std::size_t p = 0; p < 5; ++p) {
        const auto path = sdde::solve(model, driver, p);
        const auto cum = malliavin::drift_slope_cumint(path);
        std::vector<double> phi(grid.cells());
        for (std::size_t k = 0; k < grid.cells(); ++k)
            phi[k] = model.sigma.expr(model.eta(grid.cell_left(k) - model.delay)) *
                     std::exp(cum.back() - cum[k]);
        const double norm2 = hspace::h_norm2(hspace::StepFunction(grid, phi), w);
        CHECK(norm2 >=
              model.lambda() * model.lambda() * std::exp(-2.0 * mr) * t2h * (1.0 - 1e-12));
        CHECK(norm2 > 0.0);
    }
}

TEST_CASE("scaling sigma by kappa scales g_F by kappa^2 exactly (drift-free)") {
    const ModelSpec base = testmodels::make_model("1+0.5*tanh(x)", "0");
    const ModelSpec scaled = testmodels::make_model("2+1*tanh(x)", "0");
    const auto gf1 = nvdensity::estimate_gf(base, 0.5, 500, 8, 1), gf2 =
        nvdensity::estimate_gf(scaled, 0.5, 500, 8, 1);
    REQUIRE(gf1.bin_centers.size() == gf2.bin_centers.size());
    for (std::size_t i = 0; i < gf1.bin_centers.size(); ++i) {
        CHECK(gf2.bin_centers[i] == Catch::Approx(2.0 * gf1.bin_centers[i]).margin(1e-12));
        CHECK(gf2.gf_values[i] == Catch::Approx(4.0 * gf1.gf_values[i]).epsilon(1e-12));
        CHECK(gf2.counts[i] == gf1.counts[i]);
    }
}

TEST_CASE("estimate_gf preconditions") {
    const ModelSpec model = testmodels::standard();
    CHECK_THROWS_AS(nvdensity::estimate_gf(model, 1.5, 500, 8, 1), ConfigError);  // t > r
    CHECK_THROWS_AS(nvdensity::estimate_gf(model, 0.5, 500, 4, 1), ConfigError);  // few nodes
    const ModelSpec bad = testmodels::make_model("tanh(x)", "0"); // sigma crosses zero
    CHECK_THROWS_AS(nvdensity::estimate_gf(bad, 0.5, 500, 8, 1), ConfigError);

    // an explicit regression bandwidth is honoured
    const auto gf = nvdensity::estimate_gf(model, 0.5, 500, 8, 1, 21, 0.07);
    CHECK(gf.bandwidth == 0.07);
}

TEST_CASE("constant g closes the formula to the exact Gaussian density") {
    nvdensity::GfEstimate gf;
    gf.t = 0.5;
    const double var = 0.64;
    for (double c = -4.0; c <= 4.0; c += 0.25) {
        gf.bin_centers.push_back(c);
        gf.gf_values.push_back(var);
        gf.stderrs.push_back(0.0);
        gf.counts.push_back(1000);
    }
    const double abs_dev = std::sqrt(var) * std::sqrt(2.0 / std::numbers::pi);
    std::vector<double> xs;
    for (double x = -2.0; x <= 2.0; x += 0.125) xs.push_back(x);
    const auto est = nvdensity::density_from_gf(gf, abs_dev, xs);
    CHECK(est.method == "nv-formula");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(est.values[i] ==
              Catch::Approx(stats::normal_pdf(xs[i], 0.0, var)).epsilon(1e-9));
        CHECK(est.values[i] >= 0.0);
    }
    // outside the binned range
    const std::vector<double> outside{9.0};
    CHECK_THROWS_AS(nvdensity::density_from_gf(gf, abs_dev, outside), NumericError);
}

TEST_CASE("NV density matches the closed form on the gaussian reduction") {
    const ModelSpec model = testmodels::gaussian_reduction();
    const double t = 0.5;
    const auto gf = nvdensity::estimate_gf(model, t, 20000, 8, 31);
    const auto stats_c = sdde::centering_from_samples(gf.sample_f);
    const double th = std::pow(t, model.hurst);
    std::vector<double> xs;
    for (int i = -16; i <= 16; ++i) xs.push_back(2.0 * th * static_cast<double>(i) / 16.0);
    const auto nv = nvdensity::density_from_gf(gf, stats_c.abs_dev, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double exact = stats::normal_pdf(xs[i], 0.0, th * th);
        CHECK(std::abs(nv.values[i] - exact) / exact <= 0.05);
    }

    // mass invariant over +-4 population standard deviations (clamped to the
    // binned range, which a 20000-path run covers with room to spare)
    const double lo = std::max(-4.0 * th, gf.bin_centers.front());
    const double hi = std::min(4.0 * th, gf.bin_centers.back());
    std::vector<double> wide;
    const std::size_t n = 321;
    for (std::size_t i = 0; i < n; ++i)
        wide.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    const auto nv_wide = nvdensity::density_from_gf(gf, stats_c.abs_dev, wide);
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        mass += 0.5 * (nv_wide.values[i] + nv_wide.values[i + 1]) * (wide[i + 1] - wide[i]);
    CHECK(mass >= 0.90);
    CHECK(mass <= 1.02);
    for (double v : nv_wide.values) CHECK(v >= 0.0);
}

TEST_CASE("kde against a known density") {
    PathRng rng(314, 15);
    std::vector<double> samples(100000);
    for (auto& s : samples) s = rng.gaussian();
    std::vector<double> xs;
    for (int i = -20; i <= 20; ++i) xs.push_back(0.1 * static_cast<double>(i));
    const auto est = stats::kde(samples, xs);
    CHECK(est.method == "kde");
    for (std::size_t i = 0; i < xs.size(); ++i)
        CHECK(std::abs(est.values[i] - stats::normal_pdf(xs[i], 0.0, 1.0)) <= 0.02);

    SECTION("mass over +-5 sd") {
        std::vector<double> wide;
        const std::size_t n = 501;
        for (std::size_t i = 0; i < n; ++i)
            wide.push_back(-5.0 + 10.0 * static_cast<double>(i) / (n - 1));
        const auto w = stats::kde(samples, wide);
        double mass = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i)
            mass += 0.5 * (w.values[i] + w.values[i + 1]) * (wide[i + 1] - wide[i]);
        CHECK(mass >= 0.98);
        CHECK(mass <= 1.0);
    }
    SECTION("degenerate and undersized samples are errors") {
        std::vector<double> point(500, 1.25);
        CHECK_THROWS_AS(stats::kde(point, xs), NumericError);
        std::vector<double> tiny(50, 0.0);
        CHECK_THROWS_AS(stats::kde(tiny, xs), ConfigError);
    }
}

TEST_CASE("estimated density is symmetric for symmetric models") {
    const ModelSpec model = testmodels::gaussian_reduction();
    const auto res = nvdensity::verify_early_bounds(model, 0.5, 20000, 606);
    const std::size_t n = res.xs.size();
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t mirror = n - 1 - i;
        const double band = 5.0 * (res.kde_se[i] + res.kde_se[mirror]);
        CHECK(std::abs(res.p_kde[i] - res.p_kde[mirror]) <= band + 0.01);
        CHECK(std::abs(res.p_nv[i] - res.p_nv[mirror]) <=
              0.10 * std::max(res.p_nv[i], res.p_nv[mirror]) + 1e-6);
    }
}

TEST_CASE("two-sided early bound holds; swapped constants fail") {
    const ModelSpec model = testmodels::standard();
    const auto res = nvdensity::verify_early_bounds(model, 0.5, 5000, 11213);
    CHECK(res.report.pass);
    CHECK(res.report.n_violations == 0);

    // gaussian reduction: the bounds collapse onto each other
    const ModelSpec reduction = testmodels::gaussian_reduction();
    const auto collapsed = nvdensity::verify_early_bounds(reduction, 0.5, 5000, 11214);
    CHECK(collapsed.report.pass);
    for (std::size_t i = 0; i < collapsed.xs.size(); ++i)
        CHECK(collapsed.lower[i] == Catch::Approx(collapsed.upper[i]).epsilon(1e-12));

    // negative control: swapping sigma_min and sigma_max must fail
    const auto swapped = nvdensity::verify_early_bounds_with(
        model, 0.5, 5000, 11213, res.sigma_max_sq, res.sigma_min_sq);
    CHECK_FALSE(swapped.report.pass);
}
