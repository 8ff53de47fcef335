#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace fsdde {

/// Machine-readable verdict for one verified inequality: the constants that
/// entered it, the margin at each test point, and pass/fail. A report fails
/// iff any margin dropped below -tolerance.
struct BoundReport {
    std::string name;
    std::vector<std::pair<std::string, double>> constants;
    double tolerance = 0.0;

    std::size_t n_checked = 0;
    std::size_t n_violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    bool pass = false;

    // optional per-point detail kept for CSV emission
    std::vector<double> points;
    std::vector<double> margins;

    std::vector<std::string> notes;

    void set_constant(std::string key, double value) {
        constants.emplace_back(std::move(key), value);
    }

    void add(double point, double margin, bool keep_detail = true) {
        ++n_checked;
        if (margin < -tolerance) ++n_violations;
        if (margin < worst_margin) worst_margin = margin;
        if (keep_detail) {
            points.push_back(point);
            margins.push_back(margin);
        }
    }

    void finalize() { pass = n_checked > 0 && n_violations == 0; }
};

} // namespace fsdde
