#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "rng.hpp"

namespace fsdde {
namespace fbm {

/// R_H(t,s) = (|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2.
inline double covariance(double t, double s, double hurst) {
    if (!(hurst > 0.5 && hurst < 1.0)) throw ConfigError("covariance: hurst must lie in (1/2, 1)");
    const double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(std::abs(t), h2) + std::pow(std::abs(s), h2) -
                  std::pow(std::abs(t - s), h2));
}

/// A seeded collection of exactly sampled fBm paths on a grid, with the
/// Cholesky factor of the covariance matrix cached. Immutable after creation.
struct FbmBatch {
    double hurst = 0.0;
    Grid grid;                 // times, grid.times[0] == 0
    std::uint64_t seed = 0;
    Matrix paths;              // n_paths x n_times, column 0 is identically 0
    Matrix factor;             // lower Cholesky factor over the positive times

    std::size_t n_paths() const { return paths.rows(); }
    std::size_t n_times() const { return paths.cols(); }
    double value(std::size_t path, std::size_t time_index) const { return paths(path, time_index); }
};

/// Exact Gaussian sampling from the covariance; path i depends only on
/// (seed, i), never on n_paths or on the worker count.
inline FbmBatch sample(const Grid& grid, double hurst, std::size_t n_paths, std::uint64_t seed) {
    if (!(hurst > 0.5 && hurst < 1.0)) throw ConfigError("sample: hurst must lie in (1/2, 1)");
    if (grid.times.front() != 0.0) throw ConfigError("sample: fBm grid must start at time 0");
    if (grid.times.size() < 2) throw ConfigError("sample: need at least one positive time");
    if (n_paths < 1) throw ConfigError("sample: need at least one path");

    const std::size_t m = grid.times.size() - 1; // positive times
    Matrix cov(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            cov(i, j) = covariance(grid.times[i + 1], grid.times[j + 1], hurst);

    FbmBatch batch;
    batch.hurst = hurst;
    batch.grid = grid;
    batch.seed = seed;
    batch.factor = cholesky(cov);
    batch.paths = Matrix(n_paths, m + 1, 0.0);

    parallel_for(n_paths, [&](std::size_t p) {
        PathRng rng(seed, p);
        std::vector<double> z(m);
        for (std::size_t k = 0; k < m; ++k) z[k] = rng.gaussian();
        const std::vector<double> b = lower_apply(batch.factor, z);
        for (std::size_t k = 0; k < m; ++k) batch.paths(p, k + 1) = b[k];
    });
    return batch;
}

/// Diagnostic for the stationary-increment moment identity: for p = 2 the
/// population ratio E|B_t - B_s|^2 / |t-s|^{2H} is exactly 1, so the
/// empirical ratio has to sit within a few standard errors of 1 on every
/// grid pair. `gamma` is the Hoelder order under scrutiny; it must be < H.
inline BoundReport increments_hoelder_check(const FbmBatch& batch, double gamma,
                                            double n_se = 5.0) {
    if (!(gamma < batch.hurst)) throw ConfigError("hoelder check: gamma must be below hurst");
    const std::size_t n = batch.n_paths();
    const std::size_t m = batch.n_times();
    const double se = std::sqrt(2.0 / static_cast<double>(n)); // sd of (dB)^2 is sqrt(2)*|t-s|^{2H}

    BoundReport report;
    report.name = "fbm_increments_hoelder";
    report.set_constant("hurst", batch.hurst);
    report.set_constant("gamma", gamma);
    report.set_constant("n_paths", static_cast<double>(n));
    report.set_constant("se_of_ratio", se);
    report.tolerance = 0.0;

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double dt = batch.grid.times[j] - batch.grid.times[i];
            const double scale = std::pow(dt, 2.0 * batch.hurst);
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                const double d = batch.paths(p, j) - batch.paths(p, i);
                acc += d * d;
            }
            const double ratio = acc / static_cast<double>(n) / scale;
            // margin >= 0 iff the ratio is within n_se standard errors of 1
            report.add(dt, n_se * se - std::abs(ratio - 1.0), m <= 32);
        }
    }
    report.finalize();
    return report;
}

} // namespace fbm
} // namespace fsdde
