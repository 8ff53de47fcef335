#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "fbm.hpp"
#include "hspace.hpp"
#include "malliavin.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "sdde.hpp"
#include "stats.hpp"

namespace fsdde {
namespace khbound {

/// The chained lower-bound construction for one (t, x): uniform partition of
/// [0, t] into N blocks, waypoints from eta_0 to x, and the constants ledger
/// of the final proof. Plans that violate a ledger constraint are marked
/// infeasible, not rejected.
///
/// sigma_n is the variance scale Delta^H (block H-norm of the unit function
/// equals sigma_n^2 exactly); chain_scale = t^H / sqrt(N) is the scale under
/// which the waypoint identities of the final proof hold verbatim. The two
/// coincide only for H = 1/2; see the partition remark in the reports.
struct ChainPlan {
    double t = 0.0;
    double x = 0.0;
    double eta0 = 0.0;
    double hurst = 0.0;
    std::size_t n_blocks = 0;   // N
    double delta = 0.0;         // t / N
    double sigma_n = 0.0;       // Delta^H
    double chain_scale = 0.0;   // t^H / sqrt(N)
    std::vector<double> waypoints; // y_0 = eta0, ..., y_N = x
    double radius = 0.0;        // c1 * chain_scale, the interval half-width

    double c = 0.0;   // J1 prefactor (2 pi Lambda^2)^{-1/2}
    double c1 = 0.0;
    double c2 = 0.0;
    double rho = 0.0; // -log(c c1 / 4)
    double gamma = std::numeric_limits<double>::quiet_NaN(); // measured decay rate, not an input

    bool ok_half_exp = false; // exp(-8 c1^2 / lambda^2) >= 1/2
    bool ok_rho = false;      // rho > 0
    bool ok_n_rho = false;    // N rho^N >= 1
    bool ok_spacing = false;  // 1/sqrt(c2) <= c1

    bool feasible() const { return ok_half_exp && ok_rho && ok_n_rho && ok_spacing; }
};

/// Builds the chain for target x at time t in (r, T]. N = max(1,
/// ceil(c2 (x-eta0)^2 / t^{2H})); an N too small for the delay structure
/// (Delta >= r) is an error that names the smallest N fixing it.
inline ChainPlan plan_chain(const ModelSpec& model, double t, double x, double c1, double c2) {
    model.require_elliptic();
    if (!(t > model.delay)) throw ConfigError("plan_chain: t must exceed the delay");
    if (!(c1 > 0.0 && c2 > 0.0)) throw ConfigError("plan_chain: c1 and c2 must be positive");

    ChainPlan plan;
    plan.t = t;
    plan.x = x;
    plan.eta0 = model.eta0;
    plan.hurst = model.hurst;
    plan.c1 = c1;
    plan.c2 = c2;

    const double t2h = std::pow(t, 2.0 * model.hurst);
    const double dx = x - model.eta0;
    const double n_real = c2 * dx * dx / t2h;
    plan.n_blocks = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(n_real - 1e-12)));

    plan.delta = t / static_cast<double>(plan.n_blocks);
    if (plan.delta >= model.delay) {
        const std::size_t n_min = static_cast<std::size_t>(std::floor(t / model.delay)) + 1;
        throw NumericError("plan_chain: block width " + std::to_string(plan.delta) +
                           " >= delay; need at least N = " + std::to_string(n_min) + " blocks");
    }
    plan.sigma_n = std::pow(plan.delta, model.hurst);
    plan.chain_scale = std::pow(t, model.hurst) / std::sqrt(static_cast<double>(plan.n_blocks));
    plan.radius = c1 * plan.chain_scale;

    plan.waypoints.resize(plan.n_blocks + 1);
    for (std::size_t n = 0; n <= plan.n_blocks; ++n)
        plan.waypoints[n] =
            model.eta0 + dx * (static_cast<double>(n) / static_cast<double>(plan.n_blocks));

    const double lambda = model.lambda();
    plan.c = 1.0 / std::sqrt(2.0 * std::numbers::pi * model.lambda_cap() * model.lambda_cap());
    plan.ok_half_exp = std::exp(-8.0 * c1 * c1 / (lambda * lambda)) >= 0.5 - 1e-12;
    const double log_arg = plan.c * c1 / 4.0;
    plan.ok_rho = log_arg < 1.0;
    plan.rho = -std::log(log_arg);
    plan.ok_n_rho = plan.ok_rho && static_cast<double>(plan.n_blocks) *
                                           std::pow(plan.rho, static_cast<double>(plan.n_blocks)) >=
                                       1.0 - 1e-12;
    plan.ok_spacing = 1.0 / std::sqrt(c2) <= c1 + 1e-12;
    return plan;
}

/// Same plan with N forced; x is back-solved so that the block-count formula
/// is self-consistent. Used for refinement scans over N.
inline ChainPlan plan_chain_with_blocks(const ModelSpec& model, double t, std::size_t n_blocks,
                                        double c1, double c2) {
    const double x = model.eta0 +
                     std::pow(t, model.hurst) * std::sqrt(static_cast<double>(n_blocks) / c2);
    ChainPlan plan = plan_chain(model, t, x, c1, c2);
    if (plan.n_blocks != n_blocks)
        throw NumericError("plan_chain_with_blocks: block count did not round-trip");
    return plan;
}

/// Largest c1 satisfying the half-exponential constraint for a given lambda.
inline double max_feasible_c1(double lambda) {
    return lambda * std::sqrt(std::log(2.0) / 8.0);
}

/// Smallest steps-per-delay-block m >= min_steps such that every chain block
/// boundary n t/N lands on the solver grid of step r/m.
inline std::size_t aligned_steps_per_delay(double t, double delay, std::size_t n_blocks,
                                           std::size_t min_steps) {
    for (std::size_t m = std::max<std::size_t>(1, min_steps); m <= 1000000; ++m) {
        const double cells_per_block = static_cast<double>(m) * t /
                                       (static_cast<double>(n_blocks) * delay);
        if (std::abs(cells_per_block - std::round(cells_per_block)) < 1e-9 &&
            cells_per_block >= 1.0)
            return m;
    }
    throw ConfigError("aligned_steps_per_delay: no aligned grid below 10^6 steps");
}

/// Per-block summary of the conditional variance check.
struct BlockVarianceStats {
    std::size_t block = 0;
    double v_min = std::numeric_limits<double>::infinity();
    double v_max = -std::numeric_limits<double>::infinity();
};

struct J1BracketResult {
    BoundReport report;
    std::vector<BlockVarianceStats> blocks;
    double bracket_lo = 0.0; // lambda^2 sigma_N^2
    double bracket_hi = 0.0; // Lambda^2 sigma_N^2
    double v_over_sigma2_max = 0.0;     // max_n v_n / sigma_N^2
    double sigma2_visited_max = 0.0;    // max sigma(X_{s-r})^2 over the scanned states
};

/// Checks lambda^2 sigma_N^2 <= v_n <= Lambda^2 sigma_N^2 for the block
/// conditional variance v_n = ||sigma(X_{.-r})||^2_{H[t_{n-1},t_n]} on every
/// path and block, and that the conditional-Gaussian density with variance
/// v_n at the chaining distance 4 c1 sigma_N stays above the J1 floor
/// (2 pi Lambda^2 sigma_N^2)^{-1/2} exp(-8 c1^2 / lambda^2).
inline J1BracketResult j1_variance_bracket(std::span<const sdde::SolutionPath> paths,
                                           const ChainPlan& plan,
                                           const hspace::CellWeightMatrix& w) {
    if (paths.empty()) throw ConfigError("j1_variance_bracket: empty batch");
    const ModelSpec& model = *paths.front().model;
    const double lambda = model.lambda();
    const double lambda_cap = model.lambda_cap();
    const double s2 = plan.sigma_n * plan.sigma_n;

    J1BracketResult res;
    res.bracket_lo = lambda * lambda * s2;
    res.bracket_hi = lambda_cap * lambda_cap * s2;
    res.blocks.resize(plan.n_blocks);
    for (std::size_t n = 0; n < plan.n_blocks; ++n) res.blocks[n].block = n + 1;

    // margins below are scale-free: variance margins in units of sigma_N^2,
    // floor margins relative to the floor itself
    BoundReport& rep = res.report;
    rep.name = "j1_variance_bracket";
    rep.set_constant("sigma_n_sq", s2);
    rep.set_constant("bracket_lo", res.bracket_lo);
    rep.set_constant("bracket_hi", res.bracket_hi);
    rep.set_constant("n_blocks", static_cast<double>(plan.n_blocks));
    rep.set_constant("n_paths", static_cast<double>(paths.size()));
    rep.tolerance = 1e-9;

    const double dist = 4.0 * plan.c1 * plan.sigma_n;
    const double j1_floor = std::exp(-8.0 * plan.c1 * plan.c1 / (lambda * lambda)) /
                            std::sqrt(2.0 * std::numbers::pi * res.bracket_hi);
    rep.set_constant("j1_floor", j1_floor);

    const std::size_t m = model.steps_per_block;
    for (const sdde::SolutionPath& path : paths) {
        for (std::size_t n = 1; n <= plan.n_blocks; ++n) {
            const malliavin::BlockSpan block{plan.delta * static_cast<double>(n - 1),
                                             plan.delta * static_cast<double>(n)};
            const std::size_t i0 = path.index_of(block.t0);
            const std::size_t i1 = path.index_of(block.t1);
            const std::size_t cells = i1 - i0;
            if (w.grid.cells() != cells)
                throw NumericError("j1_variance_bracket: weight grid does not match block layout");
            double acc = 0.0;
            std::vector<double> f(cells);
            for (std::size_t i = 0; i < cells; ++i) {
                const double s = model.sigma.expr(path.values[i0 + i - m]);
                f[i] = s;
                res.sigma2_visited_max = std::max(res.sigma2_visited_max, s * s);
            }
            for (std::size_t i = 0; i < cells; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < cells; ++j) row += w.weights(i, j) * f[j];
                acc += f[i] * row;
            }
            const double v = alpha_h(model.hurst) * acc;
            BlockVarianceStats& bs = res.blocks[n - 1];
            bs.v_min = std::min(bs.v_min, v);
            bs.v_max = std::max(bs.v_max, v);
            res.v_over_sigma2_max = std::max(res.v_over_sigma2_max, v / s2);
            rep.add(static_cast<double>(n),
                    std::min(v - res.bracket_lo, res.bracket_hi - v) / s2, false);
            // J1 floor attained at the bracket endpoints
            const double cond_density = stats::normal_pdf(dist, 0.0, v);
            rep.add(static_cast<double>(n), (cond_density - j1_floor) / j1_floor, false);
        }
    }
    rep.finalize();
    return res;
}

struct RnResult {
    BoundReport report;
    double max_abs_rn = 0.0;   // max over paths and blocks
    double delta = 0.0;
};

/// |R_n| <= ||b||_inf * Delta for the drift remainder of every block, by
/// trapezoid of b(X_s) on the solver grid.
inline RnResult rn_smallness(std::span<const sdde::SolutionPath> paths, const ChainPlan& plan) {
    if (paths.empty()) throw ConfigError("rn_smallness: empty batch");
    const ModelSpec& model = *paths.front().model;
    const double cap = model.drift_sup() * plan.delta;

    RnResult res;
    res.delta = plan.delta;
    BoundReport& rep = res.report;
    rep.name = "rn_smallness";
    rep.set_constant("drift_sup", model.drift_sup());
    rep.set_constant("delta", plan.delta);
    rep.set_constant("cap", cap);
    rep.tolerance = 1e-12 * std::max(1.0, cap);

    const double dt = model.step();
    for (const sdde::SolutionPath& path : paths) {
        for (std::size_t n = 1; n <= plan.n_blocks; ++n) {
            const std::size_t i0 = path.index_of(plan.delta * static_cast<double>(n - 1));
            const std::size_t i1 = path.index_of(plan.delta * static_cast<double>(n));
            double acc = 0.0;
            double prev = model.b.expr(path.values[i0]);
            for (std::size_t g = i0 + 1; g <= i1; ++g) {
                const double cur = model.b.expr(path.values[g]);
                acc += 0.5 * (prev + cur) * dt;
                prev = cur;
            }
            const double rn = std::abs(acc);
            res.max_abs_rn = std::max(res.max_abs_rn, rn);
            rep.add(static_cast<double>(n), cap - rn, false);
        }
    }
    rep.set_constant("max_abs_rn", res.max_abs_rn);
    rep.finalize();
    return res;
}

/// Both forms of the chained bound. `exact` is the closed chain
/// (1/(c1 t^H)) exp(N log(c c1/4) + log(N)/2); `simplified` evaluates the
/// Gaussian-type form at the plan's integer N, so exact/simplified = sqrt(N);
/// `continuous` keeps the real exponent c2 (x-eta0)^2 / t^{2H}.
struct ChainBound {
    double exact = 0.0;
    double simplified = 0.0;
    double continuous = 0.0;
};

inline ChainBound chain_lower_bound(const ChainPlan& plan) {
    if (plan.c * plan.c1 >= 4.0)
        throw NumericError("chain_lower_bound: c*c1 must stay below 4 (log domain)");
    if (!plan.feasible()) throw NumericError("chain_lower_bound: infeasible plan");
    const double th = std::pow(plan.t, plan.hurst);
    const double n = static_cast<double>(plan.n_blocks);
    ChainBound out;
    out.exact = std::exp(n * std::log(plan.c * plan.c1 / 4.0) + 0.5 * std::log(n)) /
                (plan.c1 * th);
    out.simplified = std::exp(-plan.rho * n) / (plan.c1 * th);
    const double dx = plan.x - plan.eta0;
    out.continuous = std::exp(-plan.rho * plan.c2 * dx * dx / (th * th)) / (plan.c1 * th);
    return out;
}

struct LateBoundOptions {
    double band_se = 3.0;
    std::size_t c3_grid = 32;
    std::size_t c4_grid = 32;
    double c3_lo = 1e-6, c3_hi = 1.0;
    double c4_lo = 1e-2, c4_hi = 1e3;
    double central_mass = 0.8;  // central window for the shape regression
    bool expect_gaussian_shape = false;
};

struct LateBoundResult {
    BoundReport report;
    std::vector<double> xs;
    std::vector<double> p_kde;
    std::vector<double> kde_se;
    std::vector<bool> in_support;   // x within the sampled range
    std::size_t n_excluded = 0;
    bool feasibility_nonempty = false;
    double best_c3 = 0.0;
    double best_c4 = 0.0;
    std::vector<double> floor_values; // at (best_c3, best_c4)
    stats::LinFit shape;
    double shape_expected_slope = 0.0; // t^{2H} / (2 Var X_t)
};

/// The (r, T] verdict: strict positivity of the KDE beyond MC noise on the
/// requested range, a feasibility search for Gaussian-type floor constants
/// (c3, c4) on a log grid, and the Gaussian shape regression.
inline LateBoundResult verify_late_bound(const ModelSpec& model, double t, double x_lo,
                                         double x_hi, std::size_t points, std::size_t n_paths,
                                         std::uint64_t seed, const LateBoundOptions& opts = {}) {
    model.require_elliptic();
    if (!(t > model.delay && t <= model.horizon + 1e-12))
        throw ConfigError("verify_late_bound: t must lie in (r, T]");
    if (!(x_lo < x_hi) || points < 3) throw ConfigError("verify_late_bound: bad x range");

    const Grid grid = model.driver_grid(t);
    const fbm::FbmBatch driver = fbm::sample(grid, model.hurst, n_paths, derive_seed(seed, 3));
    // only X_t is needed per path; no reason to keep 10^5 full trajectories
    std::vector<double> samples(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        samples[p] = sdde::solve(model, driver, p).values.back();
    });

    LateBoundResult res;
    res.xs.resize(points);
    for (std::size_t i = 0; i < points; ++i)
        res.xs[i] = x_lo + (x_hi - x_lo) * static_cast<double>(i) / static_cast<double>(points - 1);

    const stats::DensityEstimate kde_est = stats::kde(samples, res.xs);
    res.p_kde = kde_est.values;
    res.kde_se.resize(points);
    for (std::size_t i = 0; i < points; ++i)
        res.kde_se[i] = stats::kde_stderr(res.p_kde[i], samples.size(), kde_est.bandwidth);

    double s_min = samples[0], s_max = samples[0];
    for (double s : samples) {
        s_min = std::min(s_min, s);
        s_max = std::max(s_max, s);
    }
    res.in_support.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
        res.in_support[i] = res.xs[i] >= s_min && res.xs[i] <= s_max;
        if (!res.in_support[i]) ++res.n_excluded;
    }

    BoundReport& rep = res.report;
    rep.name = "late_lower_bound";
    rep.set_constant("t", t);
    rep.set_constant("n_paths", static_cast<double>(n_paths));
    rep.set_constant("band_se", opts.band_se);
    rep.set_constant("n_excluded", static_cast<double>(res.n_excluded));
    rep.tolerance = 0.0;
    if (res.n_excluded > 0)
        rep.notes.push_back(std::to_string(res.n_excluded) +
                            " evaluation points beyond the sampled support were excluded");

    // (a) positivity beyond the MC band
    for (std::size_t i = 0; i < points; ++i) {
        if (!res.in_support[i]) continue;
        rep.add(res.xs[i], res.p_kde[i] - opts.band_se * res.kde_se[i]);
    }

    // (b) feasibility search on the log grid: floor holds at x whenever
    // p_kde(x) - floor >= -band
    const double th = std::pow(t, model.hurst);
    const double t2h = th * th;
    const auto log_space = [](double lo, double hi, std::size_t n, std::size_t i) {
        return lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    };
    const auto floor_at = [&](double c3, double c4, double x) {
        const double dx = x - model.eta0;
        return c3 / th * std::exp(-c4 * dx * dx / t2h);
    };
    const auto feasible_at = [&](double c3, double c4) {
        for (std::size_t i = 0; i < points; ++i) {
            if (!res.in_support[i]) continue;
            const double margin = res.p_kde[i] - floor_at(c3, c4, res.xs[i]);
            if (margin < -opts.band_se * res.kde_se[i]) return false;
        }
        return true;
    };
    for (std::size_t j = 0; j < opts.c4_grid && !res.feasibility_nonempty; ++j) {
        const double c4 = log_space(opts.c4_lo, opts.c4_hi, opts.c4_grid, j);
        for (std::size_t i = opts.c3_grid; i-- > 0;) {
            const double c3 = log_space(opts.c3_lo, opts.c3_hi, opts.c3_grid, i);
            if (feasible_at(c3, c4)) {
                res.feasibility_nonempty = true;
                res.best_c3 = c3;
                res.best_c4 = c4;
                break;
            }
        }
    }
    rep.set_constant("best_c3", res.best_c3);
    rep.set_constant("best_c4", res.best_c4);
    res.floor_values.resize(points, 0.0);
    if (res.feasibility_nonempty)
        for (std::size_t i = 0; i < points; ++i)
            res.floor_values[i] = floor_at(res.best_c3, res.best_c4, res.xs[i]);

    // (c) shape regression of -log p on (x-eta0)^2 / t^{2H} over the central
    // mass window
    {
        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        const double tail = 0.5 * (1.0 - opts.central_mass);
        const double w_lo = stats::quantile_sorted(sorted, tail);
        const double w_hi = stats::quantile_sorted(sorted, 1.0 - tail);
        std::vector<double> rx, ry;
        for (std::size_t i = 0; i < points; ++i) {
            if (res.xs[i] < w_lo || res.xs[i] > w_hi || !(res.p_kde[i] > 0.0)) continue;
            const double dx = res.xs[i] - model.eta0;
            rx.push_back(dx * dx / t2h);
            ry.push_back(-std::log(res.p_kde[i]));
        }
        if (rx.size() >= 3) res.shape = stats::linear_fit(rx, ry);
        res.shape_expected_slope = t2h / (2.0 * stats::variance(samples));
        rep.set_constant("shape_slope", res.shape.slope);
        rep.set_constant("shape_r2", res.shape.r2);
        rep.set_constant("shape_expected_slope", res.shape_expected_slope);
    }

    rep.finalize();
    if (!res.feasibility_nonempty) {
        rep.pass = false;
        rep.notes.push_back("no feasible (c3, c4) pair on the search grid");
    }
    if (opts.expect_gaussian_shape &&
        !(std::isfinite(res.shape.slope) && res.shape.r2 >= 0.9)) {
        rep.pass = false;
        rep.notes.push_back("gaussian shape regression failed (R^2 < 0.9)");
    }
    return res;
}

} // namespace khbound
} // namespace fsdde
