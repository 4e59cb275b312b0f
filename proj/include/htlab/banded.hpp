#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "htlab/errors.hpp"

namespace htlab {

/// Square band matrix with kl sub- and ku super-diagonals, stored row-wise
/// with kl extra super-diagonals of room for pivoting fill-in.
class BandMatrix {
public:
    BandMatrix(std::size_t n, std::size_t kl, std::size_t ku)
        : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1), data_(n * width_, 0.0) {}

    std::size_t size() const noexcept { return n_; }

    bool in_band(std::size_t i, std::size_t j) const noexcept {
        return j + kl_ >= i && j <= i + kl_ + ku_;
    }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * width_ + (j + kl_ - i)]; }
    double operator()(std::size_t i, std::size_t j) const {
        return in_band(i, j) ? data_[i * width_ + (j + kl_ - i)] : 0.0;
    }

    /// y = A x using the original band.
    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> y(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t j0 = i >= kl_ ? i - kl_ : 0;
            const std::size_t j1 = std::min(n_ - 1, i + kl_ + ku_);
            for (std::size_t j = j0; j <= j1; ++j) y[i] += (*this)(i, j) * x[j];
        }
        return y;
    }

    /// Solves A x = rhs in place by Gaussian elimination with partial pivoting.
    /// Destroys the matrix. Throws internal_error on a (numerically) singular pivot.
    void solve_in_place(std::span<double> rhs) {
        const std::size_t upper = kl_ + ku_;
        double scale = 0.0;
        for (double x : data_) scale = std::max(scale, std::abs(x));
        const double tiny = scale * 1e-14;
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t last_row = std::min(n_ - 1, k + kl_);
            const std::size_t last_col = std::min(n_ - 1, k + upper);
            std::size_t piv = k;
            for (std::size_t i = k + 1; i <= last_row; ++i)
                if (std::abs((*this)(i, k)) > std::abs((*this)(piv, k))) piv = i;
            if (!(std::abs((*this)(piv, k)) > tiny)) throw internal_error("banded solve: singular Jacobian");
            if (piv != k) {
                for (std::size_t j = k; j <= last_col; ++j) std::swap((*this)(k, j), (*this)(piv, j));
                std::swap(rhs[k], rhs[piv]);
            }
            const double pivot = (*this)(k, k);
            for (std::size_t i = k + 1; i <= last_row; ++i) {
                const double m = (*this)(i, k) / pivot;
                if (m == 0.0) continue;
                (*this)(i, k) = 0.0;
                for (std::size_t j = k + 1; j <= last_col; ++j) (*this)(i, j) -= m * (*this)(k, j);
                rhs[i] -= m * rhs[k];
            }
        }
        for (std::size_t k = n_; k-- > 0;) {
            const std::size_t last_col = std::min(n_ - 1, k + upper);
            double s = rhs[k];
            for (std::size_t j = k + 1; j <= last_col; ++j) s -= (*this)(k, j) * rhs[j];
            rhs[k] = s / (*this)(k, k);
        }
    }

private:
    std::size_t n_, kl_, ku_, width_;
    std::vector<double> data_;
};

}  // namespace htlab
