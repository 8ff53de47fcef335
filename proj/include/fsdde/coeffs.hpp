#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "errors.hpp"
#include "expr.hpp"

namespace fsdde {

/// Expression together with its symbolic derivative and grid-scan bounds.
/// The bounds are estimates over the scan range, not proofs; the scan range
/// has to cover the state region the model actually visits.
struct CoefficientProfile {
    Expression expr;
    Expression derivative;
    double lower = 0.0;          // min of expr over the scan grid
    double upper = 0.0;          // max of expr over the scan grid
    double derivative_sup = 0.0; // max of |expr'| over the scan grid
    double scan_lo = 0.0;
    double scan_hi = 0.0;
    std::size_t scan_points = 0;

    double sup_abs() const { return std::max(std::abs(lower), std::abs(upper)); }
};

/// Scans e and e' on a uniform grid of `points` nodes over [lo, hi].
/// Evaluation errors at any node propagate.
inline CoefficientProfile profile(const Expression& e, double lo, double hi, std::size_t points) {
    if (points < 2) throw ConfigError("profile: need at least 2 scan points");
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw ConfigError("profile: scan range must be finite with lo < hi");

    CoefficientProfile p;
    p.expr = e;
    p.derivative = differentiate(e);
    p.scan_lo = lo;
    p.scan_hi = hi;
    p.scan_points = points;

    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    double dsup = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(points - 1);
        const double x = lo + (hi - lo) * t;
        const double v = e(x);
        const double d = p.derivative(x);
        if (!std::isfinite(v) || !std::isfinite(d))
            throw EvalError("profile: non-finite value at scan point " + std::to_string(x));
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
        dsup = std::max(dsup, std::abs(d));
    }
    p.lower = vmin;
    p.upper = vmax;
    p.derivative_sup = dsup;
    return p;
}

} // namespace fsdde
