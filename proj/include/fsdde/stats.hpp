#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fsdde {
namespace stats {

inline double normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double mean(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() > 1 ? v.size() - 1 : 1);
}

/// Linear-interpolation quantile of an already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 0) throw ConfigError("quantile of empty sample");
    const double pos = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= n) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

/// 0.9 * min(sd, iqr/1.34) * n^{-1/5}.
inline double silverman_bandwidth(std::span<const double> samples) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double sd = std::sqrt(variance(samples));
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double spread = (iqr > 0.0) ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) throw NumericError("bandwidth rule: degenerate sample (zero variance)");
    return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

/// Evaluation points, estimated values and the estimator tag.
struct DensityEstimate {
    std::vector<double> points;
    std::vector<double> values;
    std::string method;      // "nv-formula" | "kde"
    double bandwidth = 0.0;  // kde only
};

/// Gaussian-kernel density estimate. bandwidth <= 0 selects the default rule.
inline DensityEstimate kde(std::span<const double> samples, std::span<const double> points,
                           double bandwidth = 0.0) {
    if (samples.size() < 100) throw ConfigError("kde: need at least 100 samples");
    const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
    DensityEstimate est;
    est.method = "kde";
    est.bandwidth = h;
    est.points.assign(points.begin(), points.end());
    est.values.resize(points.size(), 0.0);
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h *
                               std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < points.size(); ++i) {
        double acc = 0.0;
        for (double s : samples) {
            const double z = (points[i] - s) / h;
            acc += std::exp(-0.5 * z * z);
        }
        est.values[i] = norm * acc;
    }
    return est;
}

/// Asymptotic standard error of the KDE value, using the Gaussian kernel's
/// roughness 1/(2 sqrt(pi)).
inline double kde_stderr(double density_value, std::size_t n, double h) {
    const double roughness = 1.0 / (2.0 * std::sqrt(std::numbers::pi));
    return std::sqrt(std::max(0.0, density_value) * roughness / (static_cast<double>(n) * h));
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

/// Asymptotic KS critical value at level alpha: sqrt(-ln(alpha/2)/2) / sqrt(n).
inline double ks_critical(double alpha, std::size_t n) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

struct LinFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("linear_fit: bad input sizes");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

/// Gauss-Legendre rule on (0,1).
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline Quadrature gauss_legendre_01(std::size_t n) {
    if (n < 1) throw ConfigError("gauss_legendre: need at least one node");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Newton on P_n from the Chebyshev-like initial guess
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            if (n == 1) p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * static_cast<double>(k) - 1.0) * x * p1 -
                                   (static_cast<double>(k) - 1.0) * p0) /
                                  static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            const double pn = (n == 1) ? x : p1;
            const double pn1 = (n == 1) ? 1.0 : p0;
            dp = static_cast<double>(n) * (x * pn - pn1) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        // map from (-1,1) to (0,1)
        q.nodes[n - 1 - i] = 0.5 * (x + 1.0);
        q.weights[n - 1 - i] = 0.5 * 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return q;
}

/// Nadaraya-Watson regression of y on x at the given centers.
struct Regression {
    std::vector<double> centers;
    std::vector<double> values;
    std::vector<double> stderrs;
    std::vector<std::size_t> effective_n; // rounded effective sample size per center
    double bandwidth = 0.0;
};

inline Regression nadaraya_watson(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> centers, double bandwidth) {
    if (x.size() != y.size() || x.empty()) throw ConfigError("nadaraya_watson: bad input sizes");
    if (!(bandwidth > 0.0)) throw ConfigError("nadaraya_watson: bandwidth must be positive");
    Regression reg;
    reg.bandwidth = bandwidth;
    reg.centers.assign(centers.begin(), centers.end());
    reg.values.resize(centers.size(), 0.0);
    reg.stderrs.resize(centers.size(), 0.0);
    reg.effective_n.resize(centers.size(), 0);
    for (std::size_t c = 0; c < centers.size(); ++c) {
        double wsum = 0.0, wysum = 0.0, w2sum = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double z = (x[i] - centers[c]) / bandwidth;
            const double w = std::exp(-0.5 * z * z);
            wsum += w;
            wysum += w * y[i];
            w2sum += w * w;
        }
        if (wsum <= 0.0) continue;
        const double value = wysum / wsum;
        double wres = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double z = (x[i] - centers[c]) / bandwidth;
            const double w = std::exp(-0.5 * z * z);
            wres += w * (y[i] - value) * (y[i] - value);
        }
        const double ess = wsum * wsum / w2sum;
        reg.values[c] = value;
        reg.stderrs[c] = std::sqrt((wres / wsum) / std::max(1.0, ess));
        reg.effective_n[c] = static_cast<std::size_t>(ess);
    }
    return reg;
}

} // namespace stats
} // namespace fsdde
