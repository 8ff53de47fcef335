#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "hspace.hpp"
#include "linalg.hpp"
#include "report.hpp"
#include "sdde.hpp"

namespace fsdde {
namespace malliavin {

/// Cumulative trapezoid of b'(X_u) du along the positive grid; C[k] is the
/// integral from 0 to t_k. Every pathwise derivative below is the closed
/// form sigma(state at s - r) * exp(C(tau) - C(s)).
inline std::vector<double> drift_slope_cumint(const sdde::SolutionPath& path) {
    const std::size_t z = path.zero_index;
    const std::size_t n = path.times.size() - z;
    const double dt = path.step();
    std::vector<double> c(n, 0.0);
    double prev = path.model->b.derivative(path.values[z]);
    for (std::size_t k = 1; k < n; ++k) {
        const double cur = path.model->b.derivative(path.values[z + k]);
        c[k] = c[k - 1] + 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    return c;
}

namespace detail {

inline double exp_integral(const sdde::SolutionPath& path, const std::vector<double>& cumint,
                           double s, double tau) {
    const std::size_t z = path.zero_index;
    const std::size_t is = path.index_of(s) - z;
    const std::size_t it = path.index_of(tau) - z;
    return std::exp(cumint[it] - cumint[is]);
}

} // namespace detail

/// D_s X_t for 0 < s <= t <= r: sigma(eta(s - r)) * exp(int_s^t b'(X_u) du).
inline double derivative_early(const sdde::SolutionPath& path, double s, double t) {
    const ModelSpec& model = *path.model;
    if (!(s > 0.0 && s <= t)) throw NumericError("derivative_early: need 0 < s <= t");
    if (t > model.delay + 1e-9) throw NumericError("derivative_early: t must not exceed the delay");
    const std::vector<double> c = drift_slope_cumint(path);
    const double init = model.sigma.expr(model.eta(s - model.delay));
    return init * detail::exp_integral(path, c, s, t);
}

/// Contiguous sub-interval of the chain; both ends must be solver grid times.
struct BlockSpan {
    double t0 = 0.0;
    double t1 = 0.0;
    double width() const { return t1 - t0; }
};

/// D_s X_tau inside one delay-respecting block (width < r, so the diffusion
/// initial condition sigma(X_{s-r}) is read from the already-solved past).
inline double derivative_block(const sdde::SolutionPath& path, const BlockSpan& block, double s,
                               double tau) {
    const ModelSpec& model = *path.model;
    if (!(block.width() > 0.0 && block.width() < model.delay))
        throw NumericError("derivative_block: block width must be positive and below the delay");
    if (!(s > block.t0 && s <= tau && tau <= block.t1 + 1e-12))
        throw NumericError("derivative_block: need t0 < s <= tau <= t1");
    const std::vector<double> c = drift_slope_cumint(path);
    const double init = model.sigma.expr(path.at(s - model.delay));
    return init * detail::exp_integral(path, c, s, tau);
}

/// Grid table of D_s X_tau for one block: rows are direction times s, columns
/// evaluation times tau, zero below the diagonal (adaptedness).
struct DerivativeTable {
    std::size_t block_index = 0;
    std::vector<double> direction_times; // s, the positive grid times in (t0, t1]
    std::vector<double> eval_times;      // tau, same set
    Matrix values;                       // values(i, j) = D_{s_i} X_{tau_j}, 0 when tau_j < s_i
};

namespace detail {

inline DerivativeTable build_table(const sdde::SolutionPath& path, double t0, double t1,
                                   std::size_t block_index, bool early) {
    const ModelSpec& model = *path.model;
    const std::size_t i0 = path.index_of(t0);
    const std::size_t i1 = path.index_of(t1);
    const std::size_t n = i1 - i0;
    const std::vector<double> c = drift_slope_cumint(path);
    const std::size_t z = path.zero_index;

    DerivativeTable table;
    table.block_index = block_index;
    table.direction_times.resize(n);
    table.eval_times.resize(n);
    table.values = Matrix(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t gi = i0 + 1 + i;
        const double s = path.times[gi];
        table.direction_times[i] = s;
        table.eval_times[i] = s;
        const double init = early ? model.sigma.expr(model.eta(s - model.delay))
                                  : model.sigma.expr(path.values[gi - model.steps_per_block]);
        for (std::size_t j = i; j < n; ++j) {
            const std::size_t gj = i0 + 1 + j;
            table.values(i, j) = init * std::exp(c[gj - z] - c[gi - z]);
        }
    }
    return table;
}

} // namespace detail

/// Table for the early regime (0, t], t <= r.
inline DerivativeTable derivative_table_early(const sdde::SolutionPath& path, double t) {
    if (t > path.model->delay + 1e-9)
        throw NumericError("derivative_table_early: t must not exceed the delay");
    return detail::build_table(path, 0.0, t, 0, /*early=*/true);
}

/// Table for one chain block in (r, T].
inline DerivativeTable derivative_table_block(const sdde::SolutionPath& path,
                                              const BlockSpan& block, std::size_t block_index) {
    if (!(block.width() < path.model->delay))
        throw NumericError("derivative_table_block: block width must be below the delay");
    return detail::build_table(path, block.t0, block.t1, block_index, /*early=*/false);
}

namespace detail {

// Incomplete Bell polynomial B_{n,k}(x_1, ..., x_{n-k+1}) by the standard
// recurrence; counts the partition combinatorics of the chain rule.
inline double incomplete_bell(std::size_t n, std::size_t k, const std::vector<double>& x) {
    if (n == 0 && k == 0) return 1.0;
    if (n == 0 || k == 0) return 0.0;
    std::vector<std::vector<double>> b(n + 1, std::vector<double>(k + 1, 0.0));
    b[0][0] = 1.0;
    std::vector<std::vector<double>> binom(n + 1, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i <= n; ++i) {
        binom[i][0] = 1.0;
        for (std::size_t j = 1; j <= i; ++j)
            binom[i][j] = binom[i - 1][j - 1] + (j <= i - 1 ? binom[i - 1][j] : 0.0);
    }
    for (std::size_t nn = 1; nn <= n; ++nn)
        for (std::size_t kk = 1; kk <= std::min(nn, k); ++kk) {
            double acc = 0.0;
            for (std::size_t i = 1; i + kk - 1 <= nn && i <= x.size(); ++i)
                acc += binom[nn - 1][i - 1] * x[i - 1] * b[nn - i][kk - 1];
            b[nn][kk] = acc;
        }
    return b[n][k];
}

} // namespace detail

/// Uniform bounds B_j on |D^{(j)} X_tau| inside one delay block, following
/// the induction behind the closed form. Order 1 is the explicit
/// Lambda e^{Mr}; for j >= 2 the diffusion boundary terms vanish by
/// adaptedness (all directions sit past t_{n-1}), leaving only the drift
/// chain-rule terms, bounded through Faa di Bruno with the lower-order B_i
/// and a Gronwall factor. Only the constants are exposed; full order-j
/// tensors are O(grid^j) with no downstream use.
inline std::vector<double> derivative_bound_constants(const ModelSpec& model,
                                                      std::size_t max_order,
                                                      std::size_t scan_points = 20001) {
    if (max_order < 1) throw ConfigError("derivative_bound_constants: order must be >= 1");
    const double gronwall = std::exp(model.drift_slope_bound() * model.delay);

    // sup |b^{(k)}| over the scan range, k = 1 .. max_order
    std::vector<double> b_sup(max_order + 1, 0.0);
    Expression d = model.b.derivative;
    for (std::size_t k = 1; k <= max_order; ++k) {
        double sup = 0.0;
        for (std::size_t i = 0; i < scan_points; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(scan_points - 1);
            const double x = model.b.scan_lo + (model.b.scan_hi - model.b.scan_lo) * t;
            sup = std::max(sup, std::abs(d(x)));
        }
        b_sup[k] = sup;
        if (k < max_order) d = differentiate(d);
    }

    std::vector<double> bounds;
    bounds.reserve(max_order);
    bounds.push_back(model.lambda_cap() * gronwall);
    for (std::size_t j = 2; j <= max_order; ++j) {
        double source = 0.0;
        for (std::size_t k = 2; k <= j; ++k)
            source += b_sup[k] * detail::incomplete_bell(j, k, bounds);
        bounds.push_back(model.delay * source * gronwall);
    }
    return bounds;
}

/// H-norms of the block derivative pieces: DI from the frozen diffusion
/// integrand, DR from the drift remainder.
struct BlockNorms {
    std::size_t block = 0;
    double di_norm2 = 0.0; // ||D I_n||^2_{H[t0,t1]}
    double dr_norm2 = 0.0; // ||D R_n||^2_{H[t0,t1]}
    double gamma_u_lower() const { return 0.5 * di_norm2 - dr_norm2; }
};

/// Computes the two H-norms on one block. `w` holds the cell weights of a
/// block-shaped grid; only cell widths matter (kernel depends on u - v), so
/// one matrix built on [0, delta] serves every block of the chain.
inline BlockNorms block_norms(const sdde::SolutionPath& path, const BlockSpan& block,
                              const hspace::CellWeightMatrix& w, std::size_t block_index = 0) {
    const ModelSpec& model = *path.model;
    if (!(block.width() > 0.0 && block.width() < model.delay))
        throw NumericError("block_norms: block width must be positive and below the delay");
    const std::size_t i0 = path.index_of(block.t0);
    const std::size_t i1 = path.index_of(block.t1);
    const std::size_t cells = i1 - i0;
    if (w.grid.cells() != cells || std::abs(w.grid.span() - block.width()) > 1e-9)
        throw NumericError("block_norms: weight grid does not match the block layout");

    const std::vector<double> c = drift_slope_cumint(path);
    const std::size_t z = path.zero_index;
    const double dt = path.step();

    std::vector<double> di(cells), dr(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        const std::size_t gi = i0 + i; // left endpoint of cell i
        const double init = model.sigma.expr(path.values[gi - model.steps_per_block]);
        di[i] = init;
        // D_s R_n = int_s^{t1} b'(X_u) D_s X_u du, trapezoid on the solver grid
        double acc = 0.0;
        double prev = model.b.derivative(path.values[gi]) * init;
        for (std::size_t g = gi + 1; g <= i1; ++g) {
            const double dsxu = init * std::exp(c[g - z] - c[gi - z]);
            const double cur = model.b.derivative(path.values[g]) * dsxu;
            acc += 0.5 * (prev + cur) * dt;
            prev = cur;
        }
        dr[i] = acc;
    }

    const double ah = alpha_h(w.hurst);
    double di2 = 0.0, dr2 = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        double row_di = 0.0, row_dr = 0.0;
        for (std::size_t j = 0; j < cells; ++j) {
            row_di += w.weights(i, j) * di[j];
            row_dr += w.weights(i, j) * dr[j];
        }
        di2 += di[i] * row_di;
        dr2 += dr[i] * row_dr;
    }

    BlockNorms norms;
    norms.block = block_index;
    norms.di_norm2 = ah * di2;
    norms.dr_norm2 = ah * dr2;
    return norms;
}

/// Non-degeneracy of the normalised increment: ||DI||^2/2 - ||DR||^2 must
/// stay above lambda^2 sigma_N^2 / 4 on every block.
inline BoundReport check_nondegeneracy(std::span<const BlockNorms> norms, double sigma_n_sq,
                                       double lambda) {
    if (!(sigma_n_sq > 0.0)) throw ConfigError("check_nondegeneracy: sigma_N^2 must be positive");
    BoundReport report;
    report.name = "block_nondegeneracy";
    report.set_constant("sigma_n_sq", sigma_n_sq);
    report.set_constant("lambda", lambda);
    report.set_constant("floor", 0.25 * lambda * lambda * sigma_n_sq);
    const double floor = 0.25 * lambda * lambda * sigma_n_sq;
    for (const BlockNorms& b : norms)
        report.add(static_cast<double>(b.block), b.gamma_u_lower() - floor, norms.size() <= 256);
    report.finalize();
    return report;
}

} // namespace malliavin
} // namespace fsdde
