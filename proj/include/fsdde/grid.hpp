#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace fsdde {

/// Strictly increasing, finite time points. Consecutive pairs are the cells.
struct Grid {
    std::vector<double> times;

    Grid() = default;

    explicit Grid(std::vector<double> ts) : times(std::move(ts)) {
        if (times.size() < 2) throw ConfigError("grid needs at least two time points");
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!std::isfinite(times[i])) throw ConfigError("grid time not finite");
            if (i > 0 && !(times[i] > times[i - 1]))
                throw ConfigError("grid times must be strictly increasing");
        }
    }

    /// cells+1 equispaced points on [a, b].
    static Grid uniform(double a, double b, std::size_t cells) {
        if (cells == 0) throw ConfigError("grid needs at least one cell");
        std::vector<double> ts(cells + 1);
        for (std::size_t i = 0; i <= cells; ++i)
            ts[i] = a + (b - a) * (static_cast<double>(i) / static_cast<double>(cells));
        ts.back() = b;
        return Grid(std::move(ts));
    }

    std::size_t cells() const { return times.size() - 1; }
    double cell_left(std::size_t i) const { return times[i]; }
    double cell_right(std::size_t i) const { return times[i + 1]; }
    double cell_width(std::size_t i) const { return times[i + 1] - times[i]; }
    double span() const { return times.back() - times.front(); }

    bool operator==(const Grid&) const = default;
};

} // namespace fsdde
