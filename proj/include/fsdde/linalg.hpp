#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace fsdde {

/// Dense row-major matrix. Just enough for covariance factors and weight tables.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular Cholesky factor L with A = L Lᵀ.
/// Throws NumericError if A is not positive definite (degenerate grid, duplicate times).
inline Matrix cholesky(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw NumericError("cholesky: matrix not square");
    Matrix l(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d))
            throw NumericError("cholesky: matrix not positive definite at pivot " + std::to_string(j));
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

/// y = L x for a lower-triangular L.
inline std::vector<double> lower_apply(const Matrix& l, const std::vector<double>& x) {
    const std::size_t n = l.rows();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += l(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

/// Largest absolute entry of L Lᵀ - A; residual check for the cached factor.
inline double cholesky_residual(const Matrix& l, const Matrix& a) {
    const std::size_t n = a.rows();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            const std::size_t m = std::min(i, j);
            for (std::size_t k = 0; k <= m; ++k) s += l(i, k) * l(j, k);
            worst = std::max(worst, std::abs(s - a(i, j)));
        }
    return worst;
}

} // namespace fsdde
