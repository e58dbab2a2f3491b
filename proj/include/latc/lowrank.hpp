#pragma once

#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <string>

#include "latc/tensor_core.hpp"

namespace latc {

/// Economy SVD Z = U diag(sigma) V^T with s = min(m, n) columns in U and V
/// and sigma sorted nonincreasing.
template <typename Scalar>
struct SvdResult {
    Matrix<Scalar> U;
    Vector<Scalar> singular_values;
    Matrix<Scalar> V;
};

template <typename Derived>
SvdResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    if (!z.allFinite()) throw NumericalError("svd: input contains non-finite entries");
    using ColMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::BDCSVD<ColMajor> dec(ColMajor(z), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) throw NumericalError("svd: decomposition did not converge");
    SvdResult<Scalar> out{dec.matrixU(), dec.singularValues(), dec.matrixV()};
    if (!out.singular_values.allFinite() || !out.U.allFinite() || !out.V.allFinite())
        throw NumericalError("svd: decomposition produced non-finite factors");
    return out;
}

namespace detail {

inline void check_truncation(Index r, Index rows, Index cols) {
    const Index s = std::min(rows, cols);
    if (r < 0 || r >= s)
        throw DomainError("truncation r=" + std::to_string(r) + " must satisfy 0 <= r < min(m, n) = " +
                          std::to_string(s));
}

}  // namespace detail

/// Sum of all but the r largest singular values.
template <typename Derived>
typename Derived::Scalar truncated_nuclear_norm(const Eigen::MatrixBase<Derived>& z, Index r) {
    detail::check_truncation(r, z.rows(), z.cols());
    const auto dec = svd(z);
    return dec.singular_values.tail(dec.singular_values.size() - r).sum();
}

/// Generalized singular value thresholding D_{r,tau}: the r leading singular
/// values pass unchanged, the rest are soft-thresholded at tau.
///
/// This is the proximal map of tau * ||.||_{r,*}, i.e. the minimizer of
/// alpha ||X||_{r,*} + rho/2 ||X - Z||_F^2 with tau = alpha / rho. The rule is
/// positional, so ties at the truncation boundary are resolved by SVD order.
template <typename Derived>
Matrix<typename Derived::Scalar> svt(const Eigen::MatrixBase<Derived>& z, Index r, typename Derived::Scalar tau) {
    using Scalar = typename Derived::Scalar;
    detail::check_truncation(r, z.rows(), z.cols());
    if (!(tau >= Scalar(0)) || !std::isfinite(tau)) throw DomainError("svt: tau must be finite and >= 0");
    if (tau == Scalar(0)) return z;

    const auto dec = svd(z);
    Vector<Scalar> shrunk = dec.singular_values;
    for (Index i = r; i < shrunk.size(); ++i) shrunk[i] = std::max(shrunk[i] - tau, Scalar(0));

    // Drop directions that were thresholded away.
    Index keep = shrunk.size();
    while (keep > 0 && shrunk[keep - 1] == Scalar(0)) --keep;
    if (keep == 0) return Matrix<Scalar>::Zero(z.rows(), z.cols());
    return dec.U.leftCols(keep) * shrunk.head(keep).asDiagonal() * dec.V.leftCols(keep).transpose();
}

/// Per-mode weights of the tensor truncated nuclear norm.
template <typename Scalar>
using ModeWeights = std::array<Scalar, 3>;

template <typename Scalar>
void check_mode_weights(const ModeWeights<Scalar>& w) {
    Scalar sum = 0;
    for (Scalar a : w) {
        if (!(a >= Scalar(0)) || !std::isfinite(a)) throw DomainError("mode weights must be finite and >= 0");
        sum += a;
    }
    if (std::abs(sum - Scalar(1)) > Scalar(1e-9)) throw DomainError("mode weights must sum to 1");
}

/// Weighted sum of truncated nuclear norms of the three unfoldings.
template <typename Scalar>
Scalar tensor_tnn(const Tensor3<Scalar>& x, Index r, const ModeWeights<Scalar>& weights) {
    check_mode_weights(weights);
    const Dims3& d = x.dims();
    if (r < 0 || r >= std::min({d.n1, d.n2, d.n3}))
        throw DomainError("tensor_tnn: r=" + std::to_string(r) + " must be below min" + to_string(d));
    Scalar total = 0;
    for (int mode = 1; mode <= 3; ++mode) {
        const Scalar w = weights[mode - 1];
        if (w == Scalar(0)) continue;
        total += w * truncated_nuclear_norm(unfold(x, mode), r);
    }
    return total;
}

}  // namespace latc
