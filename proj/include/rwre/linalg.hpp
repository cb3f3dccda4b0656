#pragma once

#include "rwre/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace rwre::linalg {

/// Row-major dense matrix, just enough for the small systems in this library.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Solves a x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw InvalidArgument("solve: shape mismatch");
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (a(piv, k) == 0.0) throw Error("solve: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

/// Stationary distribution of an irreducible stochastic matrix by the
/// Grassmann-Taksar-Heyman elimination (subtraction free).
inline std::vector<double> stationary_gth(Matrix p) {
    const std::size_t n = p.rows();
    if (p.cols() != n || n == 0) throw InvalidArgument("stationary_gth: bad shape");
    for (std::size_t k = n - 1; k > 0; --k) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += p(k, j);
        if (!(s > 0.0)) throw Error("stationary_gth: reducible chain");
        for (std::size_t i = 0; i < k; ++i) {
            double f = p(i, k) / s;
            for (std::size_t j = 0; j < k; ++j) p(i, j) += f * p(k, j);
        }
    }
    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    double total = 1.0;
    for (std::size_t k = 1; k < n; ++k) {
        double s = 0.0, num = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            num += pi[j] * p(j, k);
            s += p(k, j);
        }
        pi[k] = num / s;
        total += pi[k];
    }
    for (double& v : pi) v /= total;
    return pi;
}

/// Banded matrix with lower/upper bandwidth w, LU-factored without pivoting.
/// Intended for nonsingular M-matrices, where no-pivot elimination is stable.
class BandedMatrix {
public:
    BandedMatrix(std::size_t n, std::size_t w) : n_(n), w_(w), data_(n * (2 * w + 1), 0.0) {}

    std::size_t size() const noexcept { return n_; }
    std::size_t bandwidth() const noexcept { return w_; }

    double& at(std::size_t i, std::size_t j) noexcept { return data_[i * (2 * w_ + 1) + (j + w_ - i)]; }
    double at(std::size_t i, std::size_t j) const noexcept {
        return data_[i * (2 * w_ + 1) + (j + w_ - i)];
    }
    bool in_band(std::size_t i, std::size_t j) const noexcept {
        return j + w_ >= i && j <= i + w_ && j < n_;
    }

    void factor() {
        for (std::size_t k = 0; k < n_; ++k) {
            double pivot = at(k, k);
            if (!(pivot > 0.0)) throw Error("banded LU: nonpositive pivot");
            std::size_t iend = std::min(n_, k + w_ + 1);
            std::size_t jend = std::min(n_, k + w_ + 1);
            for (std::size_t i = k + 1; i < iend; ++i) {
                double f = at(i, k) / pivot;
                at(i, k) = f;
                if (f == 0.0) continue;
                for (std::size_t j = k + 1; j < jend; ++j) at(i, j) -= f * at(k, j);
            }
        }
        factored_ = true;
    }

    std::vector<double> solve(std::vector<double> b) const {
        if (!factored_) throw Error("banded solve before factor");
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t j0 = i > w_ ? i - w_ : 0;
            for (std::size_t j = j0; j < i; ++j) b[i] -= at(i, j) * b[j];
        }
        for (std::size_t i = n_; i-- > 0;) {
            std::size_t jend = std::min(n_, i + w_ + 1);
            for (std::size_t j = i + 1; j < jend; ++j) b[i] -= at(i, j) * b[j];
            b[i] /= at(i, i);
        }
        return b;
    }

private:
    std::size_t n_, w_;
    std::vector<double> data_;
    bool factored_ = false;
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace rwre::linalg
