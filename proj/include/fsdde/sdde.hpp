#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "fbm.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace fsdde {
namespace sdde {

/// One discretised trajectory on [-r, T'], tied to one driving fBm path.
/// Immutable after solve.
struct SolutionPath {
    const ModelSpec* model = nullptr;
    std::vector<double> times;  // -r, ..., 0, ..., t_end
    std::vector<double> values; // X at the grid times
    std::size_t zero_index = 0; // times[zero_index] == 0
    std::size_t path_index = 0;

    double step() const { return model->step(); }

    /// Index of a grid time (counted from -r); throws on off-grid times.
    std::size_t index_of(double t) const {
        const double ratio = (t - times.front()) / step();
        const double rounded = std::round(ratio);
        if (std::abs(ratio - rounded) > 1e-9 || rounded < 0.0 ||
            rounded >= static_cast<double>(times.size()))
            throw NumericError("time " + std::to_string(t) + " is not on the solution grid");
        return static_cast<std::size_t>(rounded);
    }

    double at(double t) const { return values[index_of(t)]; }
};

/// Left-point Euler step over the delay blocks:
///   X_{k+1} = X_k + sigma(X_{t_k - r}) dB_k + b(X_k) dt.
/// On each block the diffusion integrand is known from the previous block,
/// which is exactly the structure the delay provides. `driver_values` are
/// the fBm values on the model grid 0, dt, ..., K dt.
inline SolutionPath solve_on(const ModelSpec& model, std::span<const double> driver_values,
                             std::size_t path_index = 0) {
    const double dt = model.step();
    const std::size_t m = model.steps_per_block; // cells in [-r, 0]
    if (driver_values.size() < 2) throw NumericError("solve: driver must have at least one step");
    const std::size_t k_steps = driver_values.size() - 1;

    SolutionPath out;
    out.model = &model;
    out.path_index = path_index;
    out.zero_index = m;
    out.times.resize(m + k_steps + 1);
    out.values.resize(m + k_steps + 1);

    for (std::size_t k = 0; k <= m; ++k) {
        const double t = -model.delay + dt * static_cast<double>(k);
        out.times[k] = t;
        out.values[k] = (k == m) ? model.eta0 : model.eta(t);
    }
    for (std::size_t k = 1; k <= k_steps; ++k)
        out.times[m + k] = dt * static_cast<double>(k);

    for (std::size_t k = 0; k < k_steps; ++k) {
        const std::size_t here = m + k;
        const double x = out.values[here];
        const double x_delayed = out.values[here - m]; // state r in the past
        const double db = driver_values[k + 1] - driver_values[k];
        const double next = x + model.sigma.expr(x_delayed) * db + model.b.expr(x) * dt;
        if (!std::isfinite(next)) throw NumericError("solver produced a non-finite state");
        out.values[here + 1] = next;
    }
    return out;
}

inline SolutionPath solve(const ModelSpec& model, const fbm::FbmBatch& driver, std::size_t path) {
    const double dt = model.step();
    const std::size_t k_steps = driver.grid.times.size() - 1;
    for (std::size_t k = 0; k <= k_steps; ++k) {
        const double expected = dt * static_cast<double>(k);
        if (std::abs(driver.grid.times[k] - expected) > 1e-9 * std::max(1.0, expected))
            throw NumericError("driver grid is not commensurate with the model step");
    }
    const std::size_t row = path * driver.paths.cols();
    return solve_on(model,
                    std::span<const double>(driver.paths.data().data() + row, k_steps + 1), path);
}

/// Solves one path per driver row; embarrassingly parallel, output order fixed.
inline std::vector<SolutionPath> solve_batch(const ModelSpec& model, const fbm::FbmBatch& driver) {
    std::vector<SolutionPath> paths(driver.n_paths());
    parallel_for(driver.n_paths(), [&](std::size_t p) { paths[p] = solve(model, driver, p); });
    return paths;
}

/// Monte Carlo mean and mean absolute deviation of X_t over a batch,
/// with standard errors.
struct CenteringStats {
    double mean = 0.0;
    double abs_dev = 0.0;    // E|X_t - mean|
    double se_mean = 0.0;
    double se_abs_dev = 0.0;
    std::size_t n = 0;
};

inline CenteringStats centering_from_samples(const std::vector<double>& samples) {
    if (samples.empty()) throw ConfigError("mean_and_centering: empty batch");
    const std::size_t n = samples.size();
    CenteringStats s;
    s.n = n;
    double acc = 0.0;
    for (double v : samples) acc += v;
    s.mean = acc / static_cast<double>(n);
    double var = 0.0, dev = 0.0, dev2 = 0.0;
    for (double v : samples) {
        const double d = v - s.mean;
        var += d * d;
        dev += std::abs(d);
        dev2 += d * d; // same as var; kept separate for the abs-dev variance below
    }
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    s.abs_dev = dev / static_cast<double>(n);
    s.se_mean = std::sqrt(var / static_cast<double>(n));
    const double var_abs = dev2 / static_cast<double>(n) - s.abs_dev * s.abs_dev;
    s.se_abs_dev = std::sqrt(std::max(0.0, var_abs) / static_cast<double>(n));
    return s;
}

inline std::vector<double> values_at(const std::vector<SolutionPath>& batch, double t) {
    if (batch.empty()) throw ConfigError("values_at: empty batch");
    const std::size_t idx = batch.front().index_of(t);
    std::vector<double> v(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) v[i] = batch[i].values[idx];
    return v;
}

inline CenteringStats mean_and_centering(const std::vector<SolutionPath>& batch, double t) {
    return centering_from_samples(values_at(batch, t));
}

} // namespace sdde
} // namespace fsdde
