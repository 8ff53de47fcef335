#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <fsdde/hspace.hpp>
#include <fsdde/rng.hpp>

#include "support/oracles.hpp"

using namespace fsdde;
using hspace::StepFunction;

TEST_CASE("single-cell weight matches the closed form") {
    const Grid grid(std::vector<double>{0.0, 1.0});
    const auto w = hspace::cell_weights(grid, 0.75);
    CHECK(w.weights(0, 0) == Catch::Approx(8.0 / 3.0).epsilon(1e-13));

    // independent oracle: reduce to one dimension and integrate numerically,
    // int int_{[a,b]^2} |u-v|^{2H-2} = 2 int_a^b (v-a)^{2H-1}/(2H-1) dv
    const double hurst = 0.75;
    const double quad = oracles::adaptive_simpson(
        [hurst](double v) { return 2.0 * std::pow(v, 2.0 * hurst - 1.0) / (2.0 * hurst - 1.0); },
        0.0, 1.0, 1e-12);
    CHECK(w.weights(0, 0) == Catch::Approx(quad).epsilon(1e-9));
}

TEST_CASE("off-diagonal weights agree with adaptive quadrature") {
    PathRng rng(904, 1);
    for (double hurst : {0.6, 0.75, 0.9}) {
        for (int k = 0; k < 20; ++k) {
            // two disjoint cells, kernel smooth on their product
            const double a1 = rng.uniform();
            const double b1 = a1 + 0.05 + 0.4 * rng.uniform();
            const double a2 = b1 + 0.05 + 0.4 * rng.uniform();
            const double b2 = a2 + 0.05 + 0.4 * rng.uniform();
            const double closed = hspace::rectangle_weight(a1, b1, a2, b2, hurst);
            const double quad = oracles::adaptive_2d(
                [hurst](double u, double v) { return std::pow(std::abs(u - v), 2.0 * hurst - 2.0); },
                a1, b1, a2, b2);
            INFO("H = " << hurst << " cells [" << a1 << "," << b1 << "] x [" << a2 << "," << b2
                        << "]");
            CHECK(closed == Catch::Approx(quad).epsilon(1e-8));
        }
    }
}

TEST_CASE("mirror cells have equal weights and sums telescope") {
    const Grid grid = Grid::uniform(0.0, 1.0, 10);
    const auto w = hspace::cell_weights(grid, 0.75);
    // symmetry of the kernel: W[i][j] depends on the unordered pair
    CHECK(w.weights(2, 7) == w.weights(7, 2));
    CHECK(w.weights(1, 4) == Catch::Approx(w.weights(4, 1)).epsilon(0));
    // alpha_H * total = 1 on [0,1] (interval identity with a=0, b=1)
    double total = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) total += w.weights(i, j);
    CHECK(alpha_h(0.75) * total == Catch::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) CHECK(w.weights(i, j) > 0.0);
}

TEST_CASE("h_inner on indicators reproduces the fBm covariance structure") {
    const double hurst = 0.75;
    const Grid grid = Grid::uniform(0.0, 1.0, 16);
    const auto w = hspace::cell_weights(grid, hurst);

    SECTION("indicator of [0,t] has norm t^{2H}") {
        for (std::size_t cells : {4u, 9u, 16u}) {
            std::vector<double> v(16, 0.0);
            for (std::size_t i = 0; i < cells; ++i) v[i] = 1.0;
            const StepFunction f(grid, v);
            const double t = grid.times[cells];
            CHECK(hspace::h_norm2(f, w) ==
                  Catch::Approx(std::pow(t, 2.0 * hurst)).epsilon(1e-12));
        }
    }
    SECTION("constant c on [a,b] has norm c^2 (b-a)^{2H}") {
        std::vector<double> v(16, 0.0);
        for (std::size_t i = 4; i < 12; ++i) v[i] = 2.5;
        const StepFunction f(grid, v);
        const double len = grid.times[12] - grid.times[4];
        CHECK(hspace::h_norm2(f, w) ==
              Catch::Approx(2.5 * 2.5 * std::pow(len, 2.0 * hurst)).epsilon(1e-12));
    }
    SECTION("zero function") {
        const StepFunction f = StepFunction::constant(grid, 0.0);
        CHECK(hspace::h_norm2(f, w) == 0.0);
    }
    SECTION("grid mismatch is an error") {
        const Grid other = Grid::uniform(0.0, 1.0, 8);
        const StepFunction f = StepFunction::constant(other, 1.0);
        const StepFunction g = StepFunction::constant(grid, 1.0);
        CHECK_THROWS_AS(hspace::h_inner(f, g, w), NumericError);
    }
}

TEST_CASE("gram matrices of random step functions are PSD") {
    const Grid grid = Grid::uniform(0.0, 1.0, 12);
    const auto w = hspace::cell_weights(grid, 0.65);
    PathRng rng(5150, 0);
    const std::size_t family = 10;
    std::vector<StepFunction> fs;
    for (std::size_t i = 0; i < family; ++i) {
        std::vector<double> v(12);
        for (auto& x : v) x = rng.gaussian();
        fs.emplace_back(grid, v);
    }
    Matrix gram(family, family);
    double trace = 0.0;
    for (std::size_t i = 0; i < family; ++i) {
        for (std::size_t j = 0; j < family; ++j) gram(i, j) = hspace::h_inner(fs[i], fs[j], w);
        trace += gram(i, i);
    }
    const auto eig = oracles::jacobi_eigenvalues(gram);
    for (double e : eig) CHECK(e >= -1e-10 * trace);
}

TEST_CASE("refining the grid leaves h_inner unchanged") {
    const double hurst = 0.8;
    const Grid coarse = Grid::uniform(0.0, 2.0, 8);
    PathRng rng(11, 3);
    std::vector<double> cv(8), cw(8);
    for (std::size_t i = 0; i < 8; ++i) {
        cv[i] = rng.gaussian();
        cw[i] = rng.gaussian();
    }
    const auto w8 = hspace::cell_weights(coarse, hurst);
    const double base =
        hspace::h_inner(StepFunction(coarse, cv), StepFunction(coarse, cw), w8);

    // split every cell in three
    const Grid fine = Grid::uniform(0.0, 2.0, 24);
    std::vector<double> fv(24), fw(24);
    for (std::size_t i = 0; i < 24; ++i) {
        fv[i] = cv[i / 3];
        fw[i] = cw[i / 3];
    }
    const auto w24 = hspace::cell_weights(fine, hurst);
    const double refined =
        hspace::h_inner(StepFunction(fine, fv), StepFunction(fine, fw), w24);
    CHECK(refined == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("lemma: half-norm inequality") {
    SECTION("degenerate cases") {
        const Grid grid = Grid::uniform(0.0, 1.0, 6);
        const auto w = hspace::cell_weights(grid, 0.75);
        PathRng rng(8, 8);
        std::vector<double> v(6);
        for (auto& x : v) x = rng.gaussian();
        const StepFunction f(grid, v);
        std::vector<double> nv(6);
        for (std::size_t i = 0; i < 6; ++i) nv[i] = -v[i];
        const StepFunction neg(grid, nv);
        const double nf = hspace::h_norm2(f, w);

        // g = 0: ||f||^2 >= ||f||^2 / 2
        CHECK(nf >= 0.5 * nf - 1e-15);
        // g = -f: slack is ||f||^2 / 2
        std::vector<double> zeros(6, 0.0);
        const StepFunction sum(grid, zeros);
        const double slack = hspace::h_norm2(sum, w) - 0.5 * nf + hspace::h_norm2(neg, w);
        CHECK(slack == Catch::Approx(0.5 * nf).epsilon(1e-12));
    }
    SECTION("property run") {
        const BoundReport report = hspace::check_lemma_ap1(0.75, 10000, 8, 321);
        CHECK(report.pass);
        CHECK(report.n_violations == 0);
        CHECK(report.worst_margin >= -report.tolerance);
    }
}

TEST_CASE("lemma: interval identity") {
    SECTION("unit interval, H = 0.75") {
        const BoundReport r = hspace::check_lemma_ap2(0.0, 1.0, 0.75);
        CHECK(r.pass);
        double computed = 0.0, expected = 0.0;
        for (const auto& [k, v] : r.constants) {
            if (k == "computed") computed = v;
            if (k == "expected") expected = v;
        }
        CHECK(expected == Catch::Approx(8.0 / 3.0).epsilon(1e-15));
        CHECK(computed == Catch::Approx(8.0 / 3.0).epsilon(1e-12));
    }
    SECTION("a=1, b=3, H=0.6") {
        const BoundReport r = hspace::check_lemma_ap2(1.0, 3.0, 0.6);
        CHECK(r.pass);
        const double expected = std::pow(2.0, 1.2) / 0.12;
        for (const auto& [k, v] : r.constants)
            if (k == "computed") CHECK(v == Catch::Approx(expected).epsilon(1e-10));
    }
    SECTION("translation invariance") {
        const BoundReport a = hspace::check_lemma_ap2(0.0, 1.7, 0.8);
        const BoundReport b = hspace::check_lemma_ap2(2.5, 4.2, 0.8);
        double ca = 0.0, cb = 0.0;
        for (const auto& [k, v] : a.constants)
            if (k == "computed") ca = v;
        for (const auto& [k, v] : b.constants)
            if (k == "computed") cb = v;
        CHECK(ca == Catch::Approx(cb).epsilon(1e-12));
    }
    SECTION("preconditions") {
        CHECK_THROWS_AS(hspace::check_lemma_ap2(1.0, 1.0, 0.75), ConfigError);
        CHECK_THROWS_AS(hspace::check_lemma_ap2(-0.5, 1.0, 0.75), ConfigError);
    }
}
