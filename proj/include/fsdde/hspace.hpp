#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "report.hpp"
#include "rng.hpp"

namespace fsdde {

/// alpha_H = H(2H - 1), the normalisation of the singular-kernel inner product.
inline double alpha_h(double hurst) { return hurst * (2.0 * hurst - 1.0); }

namespace hspace {

/// Piecewise-constant function on the cells of a grid.
struct StepFunction {
    Grid grid;
    std::vector<double> values; // one per cell

    StepFunction(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid.cells())
            throw ConfigError("step function: need exactly one value per cell");
        for (double x : values)
            if (!std::isfinite(x)) throw ConfigError("step function: non-finite value");
    }

    static StepFunction constant(const Grid& g, double c) {
        return StepFunction(g, std::vector<double>(g.cells(), c));
    }
};

/// W[i][j] = double integral of |u-v|^{2H-2} over cell_i x cell_j,
/// by the closed-form antiderivative; no quadrature touches the diagonal
/// singularity. Symmetric, entries positive and finite for H in (1/2,1).
struct CellWeightMatrix {
    double hurst = 0.0;
    Grid grid;
    Matrix weights;
};

namespace detail {

// G''(z) = |z|^{2H-2}; rectangle integrals come out of G by inclusion-exclusion
// over the four corners.
inline double corner_antiderivative(double z, double hurst) {
    return std::pow(std::abs(z), 2.0 * hurst) / (2.0 * alpha_h(hurst));
}

} // namespace detail

/// Integral of |u-v|^{2H-2} over [a1,b1] x [a2,b2] in closed form.
inline double rectangle_weight(double a1, double b1, double a2, double b2, double hurst) {
    const auto g = [hurst](double z) { return detail::corner_antiderivative(z, hurst); };
    return g(b1 - a2) + g(a1 - b2) - g(b1 - b2) - g(a1 - a2);
}

inline CellWeightMatrix cell_weights(const Grid& grid, double hurst) {
    if (!(hurst > 0.5 && hurst < 1.0)) throw ConfigError("cell_weights: hurst must lie in (1/2, 1)");
    const std::size_t n = grid.cells();
    CellWeightMatrix w;
    w.hurst = hurst;
    w.grid = grid;
    w.weights = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = rectangle_weight(grid.cell_left(i), grid.cell_right(i),
                                              grid.cell_left(j), grid.cell_right(j), hurst);
            w.weights(i, j) = v;
            w.weights(j, i) = v;
        }
    }
    return w;
}

/// <f,g>_H = alpha_H * sum_ij f_i g_j W[i][j]. Symmetric, bilinear, PSD.
inline double h_inner(const StepFunction& f, const StepFunction& g, const CellWeightMatrix& w) {
    if (!(f.grid == w.grid) || !(g.grid == w.grid))
        throw NumericError("h_inner: step functions do not share the weight grid");
    const std::size_t n = w.grid.cells();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += w.weights(i, j) * g.values[j];
        acc += f.values[i] * row;
    }
    return alpha_h(w.hurst) * acc;
}

inline double h_norm2(const StepFunction& f, const CellWeightMatrix& w) {
    return h_inner(f, f, w);
}

/// Lemma check: ||f+g||^2 >= ||f||^2/2 - ||g||^2 for random step-function
/// pairs; the inequality is a theorem, so the minimum slack must be >= 0 up
/// to rounding.
inline BoundReport check_lemma_ap1(double hurst, std::size_t trials, std::size_t dim,
                                   std::uint64_t seed) {
    if (trials < 1) throw ConfigError("check_lemma_ap1: need at least one trial");
    if (dim < 1) throw ConfigError("check_lemma_ap1: need at least one cell");
    const Grid grid = Grid::uniform(0.0, 1.0, dim);
    const CellWeightMatrix w = cell_weights(grid, hurst);

    BoundReport report;
    report.name = "lemma_ap1_half_norm";
    report.set_constant("hurst", hurst);
    report.set_constant("trials", static_cast<double>(trials));
    report.set_constant("dim", static_cast<double>(dim));

    for (std::size_t t = 0; t < trials; ++t) {
        PathRng rng(seed, t);
        std::vector<double> fv(dim), gv(dim), sv(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            fv[i] = rng.gaussian();
            gv[i] = rng.gaussian();
            sv[i] = fv[i] + gv[i];
        }
        const StepFunction f(grid, fv), g(grid, gv), s(grid, sv);
        const double nf = h_norm2(f, w);
        const double ng = h_norm2(g, w);
        const double ns = h_norm2(s, w);
        const double slack = ns - (0.5 * nf - ng);
        const double scale = nf + ng + 1.0;
        report.tolerance = std::max(report.tolerance, 1e-12 * scale);
        report.add(static_cast<double>(t), slack, trials <= 64);
    }
    report.finalize();
    return report;
}

/// Lemma check: the un-normalised double integral over [a,b]^2 equals
/// (b-a)^{2H} / alpha_H; compares the cell-weight sum of a subdivided grid
/// against the closed form, relative error at most `rel_tol`.
inline BoundReport check_lemma_ap2(double a, double b, double hurst, std::size_t cells = 64,
                                   double rel_tol = 1e-10) {
    if (!(a >= 0.0 && a < b)) throw ConfigError("check_lemma_ap2: need 0 <= a < b");
    const Grid grid = Grid::uniform(a, b, cells);
    const CellWeightMatrix w = cell_weights(grid, hurst);
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.cells(); ++i)
        for (std::size_t j = 0; j < grid.cells(); ++j) sum += w.weights(i, j);
    const double expected = std::pow(b - a, 2.0 * hurst) / alpha_h(hurst);
    const double rel_err = std::abs(sum - expected) / expected;

    BoundReport report;
    report.name = "lemma_ap2_interval_norm";
    report.set_constant("a", a);
    report.set_constant("b", b);
    report.set_constant("hurst", hurst);
    report.set_constant("cells", static_cast<double>(cells));
    report.set_constant("expected", expected);
    report.set_constant("computed", sum);
    report.set_constant("rel_err", rel_err);
    report.add(b - a, rel_tol - rel_err);
    report.finalize();
    return report;
}

} // namespace hspace
} // namespace fsdde
