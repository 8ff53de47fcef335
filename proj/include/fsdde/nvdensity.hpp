#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
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
namespace nvdensity {

/// Binned estimate of the variance proxy g_F at time t <= r, from the
/// independent-copy representation. Raw replicate values are kept so the
/// density estimators downstream can reuse the same run.
struct GfEstimate {
    double t = 0.0;
    std::vector<double> bin_centers;
    std::vector<double> gf_values;
    std::vector<double> stderrs;
    std::vector<std::size_t> counts;
    double bandwidth = 0.0;
    std::size_t n_paths = 0;
    std::size_t theta_nodes = 0;

    double mean_estimate = 0.0; // MC mean used to center F
    double mean_stderr = 0.0;   // bias scale of that centering

    std::vector<double> sample_f; // centered F_i = X_t - mean_estimate
    std::vector<double> sample_g; // per-replicate quadrature of the pairing

    std::vector<std::size_t> dropped_bins; // empty bins, reported and removed
};

namespace detail {

/// Malliavin derivative of X_t as a step function over the cells of [0,t]:
/// Phi(s) = sigma(eta(s - r)) * exp(int_s^t b'(X_u) du), s at cell lefts.
/// `sigma_eta` caches sigma(eta(a_k - r)), identical for every path.
inline void phi_vector(const sdde::SolutionPath& path, const std::vector<double>& sigma_eta,
                       std::vector<double>& out) {
    const std::vector<double> c = malliavin::drift_slope_cumint(path);
    const double tail = c.back();
    out.resize(sigma_eta.size());
    for (std::size_t k = 0; k < sigma_eta.size(); ++k)
        out[k] = sigma_eta[k] * std::exp(tail - c[k]);
}

} // namespace detail

/// Estimates g_F(x) = E[<DF, -DL^{-1}F>_H | F = x] for F = X_t - E X_t by:
/// drawing a driver and an independent copy, mixing them at Gauss-Legendre
/// nodes of the substitution u = e^{-theta}, re-solving on the mixture,
/// pairing the two derivative vectors through the cell weights, and kernel
/// regression of the result on F.
inline GfEstimate estimate_gf(const ModelSpec& model, double t, std::size_t n_paths,
                              std::size_t theta_nodes, std::uint64_t seed, std::size_t bins = 41,
                              double bandwidth = 0.0) {
    model.require_elliptic();
    if (!(t > 0.0) || t > model.delay + 1e-12)
        throw ConfigError("estimate_gf: t must lie in (0, r] (early regime)");
    if (theta_nodes < 8) throw ConfigError("estimate_gf: need at least 8 theta nodes");
    if (n_paths < 100) throw ConfigError("estimate_gf: need at least 100 paths");
    if (bins < 3) throw ConfigError("estimate_gf: need at least 3 bins");

    const Grid grid = model.driver_grid(t);
    const std::size_t cells = grid.cells();
    const hspace::CellWeightMatrix w = hspace::cell_weights(grid, model.hurst);
    const double ah = alpha_h(model.hurst);

    // sigma(eta(s - r)) per cell; deterministic in the early regime
    std::vector<double> sigma_eta(cells);
    for (std::size_t k = 0; k < cells; ++k)
        sigma_eta[k] = model.sigma.expr(model.eta(grid.cell_left(k) - model.delay));

    const stats::Quadrature quad = stats::gauss_legendre_01(theta_nodes);

    const fbm::FbmBatch driver = fbm::sample(grid, model.hurst, n_paths, derive_seed(seed, 1));
    const fbm::FbmBatch copy = fbm::sample(grid, model.hurst, n_paths, derive_seed(seed, 2));

    GfEstimate est;
    est.t = t;
    est.n_paths = n_paths;
    est.theta_nodes = theta_nodes;
    est.sample_f.resize(n_paths);
    est.sample_g.resize(n_paths);

    parallel_for(n_paths, [&](std::size_t i) {
        const sdde::SolutionPath base = sdde::solve(model, driver, i);
        est.sample_f[i] = base.values.back(); // raw X_t; centered below

        std::vector<double> phi;
        detail::phi_vector(base, sigma_eta, phi);

        // weighted pairing vector alpha_H * W * phi, reused across nodes
        std::vector<double> wphi(cells, 0.0);
        for (std::size_t a = 0; a < cells; ++a) {
            double acc = 0.0;
            for (std::size_t b2 = 0; b2 < cells; ++b2) acc += w.weights(a, b2) * phi[b2];
            wphi[a] = ah * acc;
        }

        std::vector<double> mixed(cells + 1);
        std::vector<double> phi_q;
        double g = 0.0;
        for (std::size_t q = 0; q < theta_nodes; ++q) {
            const double u = quad.nodes[q];
            const double v = std::sqrt(1.0 - u * u);
            for (std::size_t k = 0; k <= cells; ++k)
                mixed[k] = u * driver.paths(i, k) + v * copy.paths(i, k);
            const sdde::SolutionPath shifted = sdde::solve_on(model, mixed, i);
            detail::phi_vector(shifted, sigma_eta, phi_q);
            double pairing = 0.0;
            for (std::size_t k = 0; k < cells; ++k) pairing += wphi[k] * phi_q[k];
            g += quad.weights[q] * pairing;
        }
        est.sample_g[i] = g;
    });

    const sdde::CenteringStats center = sdde::centering_from_samples(est.sample_f);
    est.mean_estimate = center.mean;
    est.mean_stderr = center.se_mean;
    for (double& f : est.sample_f) f -= center.mean;

    // histogram bins over the F-range, regression at the bin centers
    double f_lo = est.sample_f[0], f_hi = est.sample_f[0];
    for (double f : est.sample_f) {
        f_lo = std::min(f_lo, f);
        f_hi = std::max(f_hi, f);
    }
    const double width = (f_hi - f_lo) / static_cast<double>(bins);
    if (!(width > 0.0)) throw NumericError("estimate_gf: degenerate F sample");

    std::vector<double> centers(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (std::size_t b2 = 0; b2 < bins; ++b2)
        centers[b2] = f_lo + width * (static_cast<double>(b2) + 0.5);
    for (double f : est.sample_f) {
        std::size_t b2 = static_cast<std::size_t>((f - f_lo) / width);
        if (b2 >= bins) b2 = bins - 1;
        ++counts[b2];
    }

    est.bandwidth = bandwidth > 0.0 ? bandwidth : stats::silverman_bandwidth(est.sample_f);
    const stats::Regression reg =
        stats::nadaraya_watson(est.sample_f, est.sample_g, centers, est.bandwidth);

    for (std::size_t b2 = 0; b2 < bins; ++b2) {
        if (counts[b2] == 0) {
            est.dropped_bins.push_back(b2);
            continue;
        }
        if (!(reg.values[b2] > 0.0))
            throw NumericError("estimate_gf: non-positive g_F estimate in a populated bin");
        est.bin_centers.push_back(centers[b2]);
        est.gf_values.push_back(reg.values[b2]);
        est.stderrs.push_back(reg.stderrs[b2]);
        est.counts.push_back(counts[b2]);
    }
    if (est.bin_centers.size() < 2) throw NumericError("estimate_gf: fewer than two populated bins");
    return est;
}

namespace detail {

/// Piecewise-linear g_F over the populated bin centers; evaluation outside
/// the binned range is an error.
inline double gf_interp(const GfEstimate& gf, double x) {
    const auto& c = gf.bin_centers;
    if (x < c.front() - 1e-12 || x > c.back() + 1e-12)
        throw NumericError("density_from_gf: evaluation outside the binned range");
    if (x <= c.front()) return gf.gf_values.front();
    if (x >= c.back()) return gf.gf_values.back();
    std::size_t hi = 1;
    while (c[hi] < x) ++hi;
    const double frac = (x - c[hi - 1]) / (c[hi] - c[hi - 1]);
    return gf.gf_values[hi - 1] * (1.0 - frac) + gf.gf_values[hi] * frac;
}

} // namespace detail

/// Density from the Nourdin-Viens formula,
///   p(x) = E|F| / (2 g(x)) * exp(-int_0^x z/g(z) dz),
/// with trapezoidal accumulation from 0 (F is centered, so 0 is interior).
/// `points` are in centered coordinates.
inline stats::DensityEstimate density_from_gf(const GfEstimate& gf, double abs_dev,
                                              std::span<const double> points,
                                              std::size_t quad_steps = 512) {
    if (!(abs_dev > 0.0)) throw ConfigError("density_from_gf: abs_dev must be positive");
    stats::DensityEstimate est;
    est.method = "nv-formula";
    est.points.assign(points.begin(), points.end());
    est.values.resize(points.size(), 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double x = points[i];
        // trapezoid of z/g(z) from 0 to x
        double integral = 0.0;
        const double h = x / static_cast<double>(quad_steps);
        if (h != 0.0) {
            double prev = 0.0; // z/g at z = 0
            for (std::size_t k = 1; k <= quad_steps; ++k) {
                const double z = h * static_cast<double>(k);
                const double cur = z / detail::gf_interp(gf, z);
                integral += 0.5 * (prev + cur) * h;
                prev = cur;
            }
        }
        est.values[i] = abs_dev / (2.0 * detail::gf_interp(gf, x)) * std::exp(-integral);
    }
    return est;
}

struct EarlyBoundOptions {
    std::size_t eval_points = 101;
    double band_se = 3.0;       // MC confidence band in KDE standard errors
    std::size_t theta_nodes = 16;
    std::size_t bins = 41;
    double span_in_th = 3.0;    // evaluation range: mean +- span_in_th * t^H
    double gf_bandwidth = 0.0;  // 0 selects the default rule
};

struct EarlyBoundResult {
    BoundReport report;
    std::vector<double> xs;      // evaluation points, original coordinates
    std::vector<double> p_kde;
    std::vector<double> p_nv;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> kde_se;
    GfEstimate gf;
    sdde::CenteringStats centering;
    double sigma_min_sq = 0.0;
    double sigma_max_sq = 0.0;
};

/// Core check with explicit variance brackets; the public entry point fills
/// them in from the model constants. Exposed so a deliberately wrong bracket
/// can be shown to fail.
inline EarlyBoundResult verify_early_bounds_with(const ModelSpec& model, double t,
                                                 std::size_t n_paths, std::uint64_t seed,
                                                 double sigma_min_sq, double sigma_max_sq,
                                                 const EarlyBoundOptions& opts = {}) {
    model.require_elliptic();
    if (!(t > 0.0) || t > model.delay + 1e-12)
        throw ConfigError("verify_early_bounds: t must lie in (0, r]");

    EarlyBoundResult res;
    res.sigma_min_sq = sigma_min_sq;
    res.sigma_max_sq = sigma_max_sq;
    res.gf = estimate_gf(model, t, n_paths, opts.theta_nodes, seed, opts.bins, opts.gf_bandwidth);
    res.centering = sdde::centering_from_samples(res.gf.sample_f);
    // sample_f is already centered, so re-add the original mean
    res.centering.mean = res.gf.mean_estimate;
    res.centering.se_mean = res.gf.mean_stderr;

    const double mean = res.gf.mean_estimate;
    const double abs_dev = res.centering.abs_dev;
    const double th = std::pow(t, model.hurst);

    res.xs.resize(opts.eval_points);
    for (std::size_t i = 0; i < opts.eval_points; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(opts.eval_points - 1);
        res.xs[i] = mean - opts.span_in_th * th + 2.0 * opts.span_in_th * th * frac;
    }

    // KDE over raw samples (centered + mean shift keeps one sample array)
    std::vector<double> raw(res.gf.sample_f.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = res.gf.sample_f[i] + mean;
    const stats::DensityEstimate kde_est = stats::kde(raw, res.xs);
    res.p_kde = kde_est.values;
    res.kde_se.resize(res.xs.size());
    for (std::size_t i = 0; i < res.xs.size(); ++i)
        res.kde_se[i] = stats::kde_stderr(res.p_kde[i], raw.size(), kde_est.bandwidth);

    // NV-formula density on the same points (centered coordinates), clipped
    // to the binned range
    res.p_nv.assign(res.xs.size(), 0.0);
    {
        std::vector<double> centered(res.xs.size());
        for (std::size_t i = 0; i < res.xs.size(); ++i) {
            double c = res.xs[i] - mean;
            c = std::max(res.gf.bin_centers.front(), std::min(res.gf.bin_centers.back(), c));
            centered[i] = c;
        }
        res.p_nv = density_from_gf(res.gf, abs_dev, centered).values;
    }

    res.lower.resize(res.xs.size());
    res.upper.resize(res.xs.size());
    BoundReport& rep = res.report;
    rep.name = "early_two_sided_bound";
    rep.set_constant("t", t);
    rep.set_constant("sigma_min_sq", sigma_min_sq);
    rep.set_constant("sigma_max_sq", sigma_max_sq);
    rep.set_constant("abs_dev", abs_dev);
    rep.set_constant("mean", mean);
    rep.set_constant("mean_se", res.centering.se_mean);
    rep.set_constant("band_se", opts.band_se);
    rep.tolerance = 0.0;

    for (std::size_t i = 0; i < res.xs.size(); ++i) {
        const double d = res.xs[i] - mean;
        res.lower[i] = abs_dev / (2.0 * sigma_max_sq) * std::exp(-d * d / (2.0 * sigma_min_sq));
        res.upper[i] = abs_dev / (2.0 * sigma_min_sq) * std::exp(-d * d / (2.0 * sigma_max_sq));
        const double band = opts.band_se * res.kde_se[i];
        const double margin_low = (res.p_kde[i] + band) - res.lower[i];
        const double margin_high = res.upper[i] - (res.p_kde[i] - band);
        rep.add(res.xs[i], std::min(margin_low, margin_high));
    }
    rep.finalize();
    return res;
}

/// Two-sided Gaussian bound on (0, r] with the constants made explicit from
/// the proof chain: sigma_min^2 = lambda^2 e^{-2Mr} t^{2H},
/// sigma_max^2 = Lambda^2 e^{2Mr} t^{2H}.
inline EarlyBoundResult verify_early_bounds(const ModelSpec& model, double t, std::size_t n_paths,
                                            std::uint64_t seed,
                                            const EarlyBoundOptions& opts = {}) {
    const double t2h = std::pow(t, 2.0 * model.hurst);
    const double mr = model.drift_slope_bound() * model.delay;
    const double lo = model.lambda() * model.lambda() * std::exp(-2.0 * mr) * t2h;
    const double hi = model.lambda_cap() * model.lambda_cap() * std::exp(2.0 * mr) * t2h;
    return verify_early_bounds_with(model, t, n_paths, seed, lo, hi, opts);
}

} // namespace nvdensity
} // namespace fsdde
