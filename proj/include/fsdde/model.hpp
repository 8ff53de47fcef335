#pragma once

#include <cmath>
#include <cstddef>

#include "coeffs.hpp"
#include "errors.hpp"
#include "expr.hpp"
#include "grid.hpp"

namespace fsdde {

/// The full problem instance: Hurst index, horizon, delay, initial path,
/// coefficients with their scanned bounds, and the per-block grid resolution.
struct ModelSpec {
    double hurst = 0.75;
    double horizon = 1.0; // T
    double delay = 1.0;   // r
    Expression eta;       // initial path on [-r, 0], as a function of the grammar variable
    double eta0 = 0.0;
    CoefficientProfile sigma;
    CoefficientProfile b;
    std::size_t steps_per_block = 64;

    double step() const { return delay / static_cast<double>(steps_per_block); }

    double lambda() const { return sigma.lower; }          // ellipticity floor
    double lambda_cap() const { return sigma.upper; }      // ellipticity cap
    double drift_slope_bound() const { return b.derivative_sup; } // M = ||b'||_inf
    double drift_sup() const { return b.sup_abs(); }              // ||b||_inf

    void validate() const {
        if (!(hurst > 0.5 && hurst < 1.0)) throw ConfigError("model: hurst must lie in (1/2, 1)");
        if (!(delay > 0.0)) throw ConfigError("model: delay must be positive");
        if (!(horizon > 0.0)) throw ConfigError("model: horizon must be positive");
        if (steps_per_block < 1) throw ConfigError("model: need at least one step per block");
        if (!eta.valid() || !sigma.expr.valid() || !b.expr.valid())
            throw ConfigError("model: eta, sigma and b must all be set");
        const double eta_at_zero = eta(0.0);
        if (std::abs(eta_at_zero - eta0) > 1e-12)
            throw ConfigError("model: eta(0) must equal eta0 within 1e-12, got eta(0) = " +
                              std::to_string(eta_at_zero));
    }

    /// Bound verification is meaningless without a noise floor; refuse early.
    void require_elliptic() const {
        if (!(sigma.lower > 0.0))
            throw ConfigError("model: sigma scan minimum is " + std::to_string(sigma.lower) +
                              "; ellipticity (lambda > 0) is required for bound verification");
    }

    /// Number of solver steps from 0 to `t`; throws if t is not commensurate
    /// with the grid (the delay structure needs grid+r to map onto the grid).
    std::size_t steps_to(double t) const {
        const double ratio = t / step();
        const double rounded = std::round(ratio);
        if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio)) || rounded < 1.0)
            throw NumericError("time " + std::to_string(t) +
                               " is not commensurate with the solver grid (step " +
                               std::to_string(step()) + ")");
        return static_cast<std::size_t>(rounded);
    }

    /// Driver grid 0 = t_0 < ... < t_K = t with the model step.
    Grid driver_grid(double t) const {
        const std::size_t k = steps_to(t);
        return Grid::uniform(0.0, t, k);
    }
};

} // namespace fsdde
