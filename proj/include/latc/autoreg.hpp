#pragma once

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <string>
#include <vector>

#include "latc/banded_cholesky.hpp"
#include "latc/tensor_core.hpp"

namespace latc {

/// M x d autoregressive coefficients; row m holds a_m for sensor m.
template <typename Scalar>
using ARCoefficients = Matrix<Scalar>;

/// Lag set H = {h_1 < ... < h_d} over series of length T, plus the selector
/// matrices Psi_0, Psi_1..Psi_d of shape (T - h_d) x T. The selectors are kept
/// implicit: row t of Psi_0 picks column t + h_d, row t of Psi_i picks column
/// t + h_d - h_i.
class LagStructure {
public:
    LagStructure(std::vector<int> lags, Index length) : lags_(std::move(lags)), length_(length) {
        if (lags_.empty()) throw DomainError("lag set must not be empty");
        for (std::size_t i = 0; i < lags_.size(); ++i) {
            if (lags_[i] <= 0) throw DomainError("lags must be positive integers");
            if (i > 0 && lags_[i] <= lags_[i - 1]) throw DomainError("lags must be strictly increasing");
        }
        if (max_lag() >= length_)
            throw DomainError("largest lag " + std::to_string(max_lag()) + " must be below series length " +
                              std::to_string(length_));
    }

    const std::vector<int>& lags() const { return lags_; }
    Index count() const { return static_cast<Index>(lags_.size()); }
    Index max_lag() const { return lags_.back(); }
    Index length() const { return length_; }
    /// Number of rows of every selector, T - h_d.
    Index rows() const { return length_ - max_lag(); }

    Index lag(Index i) const { return lags_[static_cast<std::size_t>(i)]; }

    /// Column selected by row `row` of Psi_which (which = 0 for Psi_0, i for the i-th lag, 1-based).
    Index selected_column(Index which, Index row) const {
        return which == 0 ? row + max_lag() : row + max_lag() - lag(which - 1);
    }

    /// Dense Psi_which, for tests and the vectorized oracle.
    template <typename Scalar = double>
    Matrix<Scalar> selector(Index which) const {
        if (which < 0 || which > count()) throw DomainError("selector index out of range");
        Matrix<Scalar> out = Matrix<Scalar>::Zero(rows(), length_);
        for (Index t = 0; t < rows(); ++t) out(t, selected_column(which, t)) = Scalar(1);
        return out;
    }

    /// Dense Psi = [Psi_1 ... Psi_d], (T - h_d) x (d T).
    template <typename Scalar = double>
    Matrix<Scalar> stacked_selectors() const {
        Matrix<Scalar> out(rows(), count() * length_);
        for (Index i = 1; i <= count(); ++i) out.middleCols((i - 1) * length_, length_) = selector<Scalar>(i);
        return out;
    }

private:
    std::vector<int> lags_;
    Index length_;
};

namespace detail {

template <typename DerivedA>
void check_ar_shapes(Index rows, Index cols, const Eigen::MatrixBase<DerivedA>& a, const LagStructure& lags) {
    if (cols != lags.length())
        throw ShapeError("series length " + std::to_string(cols) + " does not match lag structure length " +
                         std::to_string(lags.length()));
    if (a.rows() != rows || a.cols() != lags.count())
        throw ShapeError("AR coefficients are " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(lags.count()));
}

}  // namespace detail

/// Total squared one-step AR residual: sum over m and t = h_d+1..T of
/// (z_{m,t} - sum_i a_{m,i} z_{m,t-h_i})^2.
template <typename DerivedZ, typename DerivedA>
typename DerivedZ::Scalar temporal_variation(const Eigen::MatrixBase<DerivedZ>& z, const Eigen::MatrixBase<DerivedA>& a,
                                             const LagStructure& lags) {
    detail::check_ar_shapes(z.rows(), z.cols(), a, lags);
    typename DerivedZ::Scalar total = 0;
    for (Index m = 0; m < z.rows(); ++m) {
        for (Index t = lags.max_lag(); t < z.cols(); ++t) {
            typename DerivedZ::Scalar e = z(m, t);
            for (Index i = 0; i < lags.count(); ++i) e -= a(m, i) * z(m, t - lags.lag(i));
            total += e * e;
        }
    }
    return total;
}

/// B_m^T B_m + alpha I in band form, with B_m = Psi_0 - sum_i a_i Psi_i.
template <typename Derived, typename Scalar = typename Derived::Scalar>
SymmetricBand<Scalar> ar_normal_matrix(const Eigen::MatrixBase<Derived>& a, const LagStructure& lags, Scalar alpha) {
    const Index d = lags.count();
    SymmetricBand<Scalar> band(lags.length(), lags.max_lag());
    // Nonzeros of one row of B_m: +1 at the current step, -a_i at each lag.
    std::vector<Scalar> coef(static_cast<std::size_t>(d + 1));
    std::vector<Index> col(static_cast<std::size_t>(d + 1));
    coef[0] = Scalar(1);
    for (Index i = 0; i < d; ++i) coef[static_cast<std::size_t>(i + 1)] = -a(i);
    for (Index t = 0; t < lags.rows(); ++t) {
        for (Index k = 0; k <= d; ++k) col[static_cast<std::size_t>(k)] = lags.selected_column(k, t);
        for (std::size_t p = 0; p < col.size(); ++p)
            for (std::size_t q = 0; q <= p; ++q) band.add(col[p], col[q], coef[p] * coef[q]);
    }
    for (Index j = 0; j < lags.length(); ++j) band.add(j, j, alpha);
    return band;
}

/// Minimizes 1/2 ||B_m z||^2 + alpha/2 ||z - x||^2 by solving
/// (B_m^T B_m + alpha I) z = alpha x with a banded Cholesky factorization.
template <typename DerivedX, typename DerivedA, typename Scalar = typename DerivedX::Scalar>
Vector<Scalar> solve_z_series(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedA>& a,
                              const LagStructure& lags, Scalar alpha) {
    if (!(alpha > Scalar(0)) || !std::isfinite(alpha)) throw DomainError("solve_z_series: alpha must be > 0");
    if (x.size() != lags.length()) throw ShapeError("solve_z_series: series length does not match lag structure");
    if (a.size() != lags.count()) throw ShapeError("solve_z_series: coefficient count does not match lag set");
    const BandedCholesky<Scalar> chol(ar_normal_matrix(a, lags, alpha));
    Vector<Scalar> rhs(x.size());
    for (Index t = 0; t < x.size(); ++t) rhs[t] = alpha * x(t);
    return chol.solve(rhs);
}

/// Row-wise application of `solve_z_series`.
template <typename Derived, typename DerivedA, typename Scalar = typename Derived::Scalar>
TimeSeriesMatrix<Scalar> solve_z_matrix(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<DerivedA>& a,
                                        const LagStructure& lags, Scalar alpha) {
    detail::check_ar_shapes(x.rows(), x.cols(), a, lags);
    TimeSeriesMatrix<Scalar> out(x.rows(), x.cols());
    for (Index m = 0; m < x.rows(); ++m) out.row(m) = solve_z_series(x.row(m), a.row(m), lags, alpha).transpose();
    return out;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> kron(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
    Matrix<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Column-wise Kronecker product.
template <typename Scalar>
Matrix<Scalar> khatri_rao(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
    Matrix<Scalar> out(a.rows() * b.rows(), a.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) out.col(j).segment(i * b.rows(), b.rows()) = a(i, j) * b.col(j);
    return out;
}

}  // namespace detail

/// Joint solve of all series through the vectorized MT x MT system
///   vec(Z^T) = alpha [(B - C)^T (B - C) + alpha I]^{-1} vec(X^T),
///   B = I_M kron Psi_0,  C = (I_M kron Psi) [(I_M khatri-rao A^T) kron I_T].
/// Dense and cubic in M*T; meant as a cross-check for `solve_z_matrix`.
template <typename Derived, typename DerivedA, typename Scalar = typename Derived::Scalar>
TimeSeriesMatrix<Scalar> solve_z_vectorized(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<DerivedA>& a,
                                            const LagStructure& lags, Scalar alpha, Index max_system_size = 2000) {
    detail::check_ar_shapes(x.rows(), x.cols(), a, lags);
    if (!(alpha > Scalar(0))) throw DomainError("solve_z_vectorized: alpha must be > 0");
    const Index M = x.rows(), T = x.cols();
    if (M * T > max_system_size)
        throw DomainError("solve_z_vectorized: system size " + std::to_string(M * T) + " exceeds guard " +
                          std::to_string(max_system_size));

    const Matrix<Scalar> eye_m = Matrix<Scalar>::Identity(M, M);
    const Matrix<Scalar> eye_t = Matrix<Scalar>::Identity(T, T);
    const Matrix<Scalar> b = detail::kron(eye_m, lags.selector<Scalar>(0));
    const Matrix<Scalar> c = detail::kron(eye_m, lags.stacked_selectors<Scalar>()) *
                             detail::kron(detail::khatri_rao(eye_m, Matrix<Scalar>(a.transpose())), eye_t);
    const Matrix<Scalar> diff = b - c;
    Matrix<Scalar> system = diff.transpose() * diff;
    system.diagonal().array() += alpha;

    // vec(X^T) stacks the rows of X, which is the row-major storage order.
    const Vector<Scalar> rhs = alpha * Eigen::Map<const Vector<Scalar>>(TimeSeriesMatrix<Scalar>(x).data(), M * T);
    const Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> llt(system);
    if (llt.info() != Eigen::Success) throw NumericalError("solve_z_vectorized: system is not positive definite");
    const Vector<Scalar> vec = llt.solve(rhs);
    return Eigen::Map<const TimeSeriesMatrix<Scalar>>(vec.data(), M, T);
}

/// Least-squares AR refit: a_m = V_m^+ z_{m, h_d+1:T}, where row t of V_m holds
/// (z_{m,t-h_1}, ..., z_{m,t-h_d}). Singular values of V_m below 1e-10 sigma_1
/// are treated as zero, so degenerate series get the minimum-norm fit.
template <typename Derived, typename Scalar = typename Derived::Scalar>
ARCoefficients<Scalar> update_coefficients(const Eigen::MatrixBase<Derived>& z, const LagStructure& lags) {
    if (z.cols() != lags.length()) throw ShapeError("update_coefficients: series length does not match lag structure");
    const Index d = lags.count(), n = lags.rows(), hd = lags.max_lag();
    using ColMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    ARCoefficients<Scalar> out(z.rows(), d);
    ColMajor design(n, d);
    Vector<Scalar> target(n);
    for (Index m = 0; m < z.rows(); ++m) {
        for (Index t = 0; t < n; ++t) {
            target[t] = z(m, t + hd);
            for (Index i = 0; i < d; ++i) design(t, i) = z(m, t + hd - lags.lag(i));
        }
        Eigen::JacobiSVD<ColMajor> dec(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = dec.singularValues();
        Vector<Scalar> coef = Vector<Scalar>::Zero(d);
        if (sv.size() > 0 && sv[0] > Scalar(0)) {
            const Scalar cutoff = Scalar(1e-10) * sv[0];
            const Vector<Scalar> ut_b = dec.matrixU().transpose() * target;
            for (Index k = 0; k < sv.size(); ++k)
                if (sv[k] > cutoff) coef += dec.matrixV().col(k) * (ut_b[k] / sv[k]);
        }
        out.row(m) = coef.transpose();
    }
    return out;
}

}  // namespace latc
