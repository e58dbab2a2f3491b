#pragma once

#include <cmath>
#include <string>

#include "latc/tensor_core.hpp"

namespace latc {

/// Symmetric banded matrix kept as its lower band: band(k, j) holds entry
/// (j + k, j) for 0 <= k <= bandwidth.
template <typename Scalar>
class SymmetricBand {
public:
    SymmetricBand(Index n, Index bandwidth)
        : band_(Matrix<Scalar>::Zero(bandwidth + 1, n)), n_(n), bandwidth_(bandwidth) {}

    Index size() const { return n_; }
    Index bandwidth() const { return bandwidth_; }

    /// Adds v to entries (i, j) and (j, i); requires |i - j| <= bandwidth.
    void add(Index i, Index j, Scalar v) {
        if (i < j) std::swap(i, j);
        band_(i - j, j) += v;
    }

    Scalar operator()(Index i, Index j) const {
        if (i < j) std::swap(i, j);
        return i - j > bandwidth_ ? Scalar(0) : band_(i - j, j);
    }

    Matrix<Scalar> dense() const {
        Matrix<Scalar> out = Matrix<Scalar>::Zero(n_, n_);
        for (Index j = 0; j < n_; ++j)
            for (Index k = 0; k <= bandwidth_ && j + k < n_; ++k) out(j + k, j) = out(j, j + k) = band_(k, j);
        return out;
    }

    Matrix<Scalar>& storage() { return band_; }
    const Matrix<Scalar>& storage() const { return band_; }

private:
    Matrix<Scalar> band_;
    Index n_;
    Index bandwidth_;
};

/// In-band Cholesky factorization A = L L^T of a symmetric positive definite
/// banded matrix. Work and storage are O(n p^2) and O(n p) for bandwidth p.
template <typename Scalar>
class BandedCholesky {
public:
    explicit BandedCholesky(SymmetricBand<Scalar> a) : l_(std::move(a)) { factorize(); }

    template <typename Derived>
    Vector<Scalar> solve(const Eigen::MatrixBase<Derived>& rhs) const {
        const Index n = l_.size(), p = l_.bandwidth();
        if (rhs.size() != n) throw ShapeError("banded solve: rhs length mismatch");
        const auto& b = l_.storage();
        Vector<Scalar> x = rhs;
        for (Index i = 0; i < n; ++i) {
            Scalar s = x[i];
            for (Index k = std::max<Index>(0, i - p); k < i; ++k) s -= b(i - k, k) * x[k];
            x[i] = s / b(0, i);
        }
        for (Index i = n - 1; i >= 0; --i) {
            Scalar s = x[i];
            for (Index k = i + 1; k <= std::min(n - 1, i + p); ++k) s -= b(k - i, i) * x[k];
            x[i] = s / b(0, i);
        }
        return x;
    }

private:
    void factorize() {
        const Index n = l_.size(), p = l_.bandwidth();
        auto& b = l_.storage();
        for (Index j = 0; j < n; ++j) {
            Scalar d = b(0, j);
            for (Index k = std::max<Index>(0, j - p); k < j; ++k) d -= b(j - k, k) * b(j - k, k);
            if (!(d > Scalar(0)) || !std::isfinite(d))
                throw NumericalError("banded Cholesky: matrix is not positive definite (pivot " + std::to_string(j) +
                                     ")");
            const Scalar djj = std::sqrt(d);
            b(0, j) = djj;
            for (Index i = j + 1; i <= std::min(n - 1, j + p); ++i) {
                Scalar s = b(i - j, j);
                for (Index k = std::max<Index>(0, i - p); k < j; ++k) s -= b(i - k, k) * b(j - k, k);
                b(i - j, j) = s / djj;
            }
        }
    }

    SymmetricBand<Scalar> l_;
};

}  // namespace latc
