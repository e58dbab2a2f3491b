#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>

#include "latc/error.hpp"

namespace latc {

using Index = Eigen::Index;

/// Dense row-major matrix. Multivariate time series are stored sensor-major:
/// row m is the series of sensor m, column t is time step t.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// M x T series matrix (Y, Z and the recovered matrix all share this layout).
template <typename Scalar>
using TimeSeriesMatrix = Matrix<Scalar>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Extents of a third-order tensor. For tensorized series: n1 = sensors,
/// n2 = time steps per day, n3 = days.
struct Dims3 {
    Index n1 = 0;
    Index n2 = 0;
    Index n3 = 0;

    Index size() const { return n1 * n2 * n3; }
    Index extent(int mode) const;
    friend bool operator==(const Dims3&, const Dims3&) = default;
};

inline std::string to_string(const Dims3& d) {
    return "(" + std::to_string(d.n1) + ", " + std::to_string(d.n2) + ", " + std::to_string(d.n3) + ")";
}

inline void check_mode(int mode) {
    if (mode < 1 || mode > 3)
        throw DomainError("tensor mode must be 1, 2 or 3, got " + std::to_string(mode));
}

inline Index Dims3::extent(int mode) const {
    check_mode(mode);
    return mode == 1 ? n1 : (mode == 2 ? n2 : n3);
}

/// Dense third-order tensor with row-major storage: element (a, b, c) lives at
/// offset (a * n2 + b) * n3 + c.
template <typename Scalar_>
class Tensor3 {
public:
    using Scalar = Scalar_;

    Tensor3() = default;

    explicit Tensor3(const Dims3& dims) : dims_(dims), data_(Vector<Scalar>::Zero(checked(dims).size())) {}

    Tensor3(const Dims3& dims, Vector<Scalar> data) : dims_(checked(dims)), data_(std::move(data)) {
        if (data_.size() != dims_.size())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                             to_string(dims_));
    }

    static Tensor3 Zero(const Dims3& dims) { return Tensor3(dims); }

    const Dims3& dims() const { return dims_; }
    Index size() const { return data_.size(); }

    Scalar& operator()(Index a, Index b, Index c) { return data_[offset(a, b, c)]; }
    const Scalar& operator()(Index a, Index b, Index c) const { return data_[offset(a, b, c)]; }

    /// Flat row-major view of the entries.
    const Vector<Scalar>& data() const { return data_; }
    Vector<Scalar>& data() { return data_; }

    Scalar squaredNorm() const { return data_.squaredNorm(); }
    Scalar norm() const { return data_.norm(); }

    Tensor3& operator+=(const Tensor3& rhs) {
        require_same_dims(rhs, "+=");
        data_ += rhs.data_;
        return *this;
    }
    Tensor3& operator-=(const Tensor3& rhs) {
        require_same_dims(rhs, "-=");
        data_ -= rhs.data_;
        return *this;
    }
    Tensor3& operator*=(Scalar s) {
        data_ *= s;
        return *this;
    }

    friend Tensor3 operator+(Tensor3 lhs, const Tensor3& rhs) { return lhs += rhs; }
    friend Tensor3 operator-(Tensor3 lhs, const Tensor3& rhs) { return lhs -= rhs; }
    friend Tensor3 operator*(Scalar s, Tensor3 t) { return t *= s; }
    friend Tensor3 operator*(Tensor3 t, Scalar s) { return t *= s; }
    friend Tensor3 operator/(Tensor3 t, Scalar s) { return t *= Scalar(1) / s; }

    friend bool operator==(const Tensor3& a, const Tensor3& b) { return a.dims_ == b.dims_ && a.data_ == b.data_; }

private:
    static const Dims3& checked(const Dims3& d) {
        if (d.n1 <= 0 || d.n2 <= 0 || d.n3 <= 0)
            throw ShapeError("tensor dims must be positive, got " + to_string(d));
        return d;
    }

    Index offset(Index a, Index b, Index c) const { return (a * dims_.n2 + b) * dims_.n3 + c; }

    void require_same_dims(const Tensor3& rhs, const char* op) const {
        if (dims_ != rhs.dims_)
            throw ShapeError(std::string("tensor ") + op + ": dims " + to_string(dims_) + " vs " + to_string(rhs.dims_));
    }

    Dims3 dims_{};
    Vector<Scalar> data_;
};

template <typename Scalar>
Scalar inner(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
    if (a.dims() != b.dims())
        throw ShapeError("inner: dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    return a.data().dot(b.data());
}

template <typename Scalar>
Scalar frobenius_norm(const Tensor3<Scalar>& x) {
    return x.norm();
}

/// Shape (rows, cols) of the mode-k unfolding of a tensor with extents `dims`.
inline std::pair<Index, Index> unfolding_shape(const Dims3& dims, int mode) {
    check_mode(mode);
    switch (mode) {
        case 1: return {dims.n1, dims.n2 * dims.n3};
        case 2: return {dims.n2, dims.n1 * dims.n3};
        default: return {dims.n3, dims.n1 * dims.n2};
    }
}

namespace detail {

// Kolda-Bader index map: the row is the mode-k index, the remaining two indices
// form the column with the lower-numbered mode varying fastest.
//   mode 1: col = b + c * n2
//   mode 2: col = a + c * n1
//   mode 3: col = a + b * n1
template <typename F>
void for_each_unfolding_index(const Dims3& d, int mode, F&& f) {
    for (Index a = 0; a < d.n1; ++a)
        for (Index b = 0; b < d.n2; ++b)
            for (Index c = 0; c < d.n3; ++c) {
                const Index flat = (a * d.n2 + b) * d.n3 + c;
                switch (mode) {
                    case 1: f(flat, a, b + c * d.n2); break;
                    case 2: f(flat, b, a + c * d.n1); break;
                    default: f(flat, c, a + b * d.n1); break;
                }
            }
}

}  // namespace detail

/// Mode-k unfolding (matricization), k in {1, 2, 3}.
template <typename Scalar>
Matrix<Scalar> unfold(const Tensor3<Scalar>& x, int mode) {
    const auto [rows, cols] = unfolding_shape(x.dims(), mode);
    Matrix<Scalar> out(rows, cols);
    const auto& data = x.data();
    detail::for_each_unfolding_index(x.dims(), mode,
                                     [&](Index flat, Index row, Index col) { out(row, col) = data[flat]; });
    return out;
}

/// Inverse of `unfold` for the given mode and tensor extents.
template <typename Derived>
Tensor3<typename Derived::Scalar> fold(const Eigen::MatrixBase<Derived>& mat, int mode, const Dims3& dims) {
    using Scalar = typename Derived::Scalar;
    const auto [rows, cols] = unfolding_shape(dims, mode);
    if (mat.rows() != rows || mat.cols() != cols)
        throw ShapeError("fold: mode-" + std::to_string(mode) + " unfolding of " + to_string(dims) + " is " +
                         std::to_string(rows) + "x" + std::to_string(cols) + ", got " + std::to_string(mat.rows()) +
                         "x" + std::to_string(mat.cols()));
    Tensor3<Scalar> out(dims);
    auto& data = out.data();
    detail::for_each_unfolding_index(dims, mode, [&](Index flat, Index row, Index col) { data[flat] = mat(row, col); });
    return out;
}

/// Splits the time axis of an M x (I*J) matrix into (time of day, day):
/// x(m, i, j) = y(m, j * I + i), so frontal slice j holds day j.
template <typename Derived>
Tensor3<typename Derived::Scalar> tensorize(const Eigen::MatrixBase<Derived>& y, Index steps_per_day, Index days) {
    using Scalar = typename Derived::Scalar;
    if (steps_per_day <= 0 || days <= 0 || y.cols() != steps_per_day * days)
        throw ShapeError("tensorize: " + std::to_string(y.cols()) + " time steps cannot be split into " +
                         std::to_string(steps_per_day) + " x " + std::to_string(days));
    Tensor3<Scalar> out(Dims3{y.rows(), steps_per_day, days});
    for (Index m = 0; m < y.rows(); ++m)
        for (Index i = 0; i < steps_per_day; ++i)
            for (Index j = 0; j < days; ++j) out(m, i, j) = y(m, j * steps_per_day + i);
    return out;
}

template <typename Derived>
Tensor3<typename Derived::Scalar> tensorize(const Eigen::MatrixBase<Derived>& y, const Dims3& dims) {
    if (y.rows() != dims.n1)
        throw ShapeError("tensorize: matrix has " + std::to_string(y.rows()) + " rows, dims " + to_string(dims));
    return tensorize(y, dims.n2, dims.n3);
}

/// Inverse of `tensorize`. Coincides with the mode-1 unfolding.
template <typename Scalar>
TimeSeriesMatrix<Scalar> detensorize(const Tensor3<Scalar>& x) {
    const Dims3& d = x.dims();
    TimeSeriesMatrix<Scalar> out(d.n1, d.n2 * d.n3);
    for (Index m = 0; m < d.n1; ++m)
        for (Index i = 0; i < d.n2; ++i)
            for (Index j = 0; j < d.n3; ++j) out(m, j * d.n2 + i) = x(m, i, j);
    return out;
}

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The observed support of an M x T series matrix; true marks an observed cell.
class ObservationMask {
public:
    ObservationMask() = default;

    ObservationMask(Index rows, Index cols, bool value = true) : observed_(BoolArray::Constant(rows, cols, value)) {
        if (rows < 0 || cols < 0) throw ShapeError("mask extents must be nonnegative");
        count_ = value ? rows * cols : 0;
    }

    explicit ObservationMask(BoolArray observed) : observed_(std::move(observed)), count_(observed_.count()) {}

    Index rows() const { return observed_.rows(); }
    Index cols() const { return observed_.cols(); }
    Index count() const { return count_; }
    bool observed(Index row, Index col) const { return observed_(row, col); }
    const BoolArray& array() const { return observed_; }

    /// Cells observed here but not in `other`.
    ObservationMask minus(const ObservationMask& other) const {
        require_same_shape(other);
        return ObservationMask(BoolArray(observed_ && !other.observed_));
    }

    bool is_subset_of(const ObservationMask& other) const {
        require_same_shape(other);
        return !(observed_ && !other.observed_).any();
    }

    friend bool operator==(const ObservationMask& a, const ObservationMask& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a.observed_ == b.observed_).all();
    }

private:
    void require_same_shape(const ObservationMask& other) const {
        if (rows() != other.rows() || cols() != other.cols()) throw ShapeError("mask shapes differ");
    }

    BoolArray observed_;
    Index count_ = 0;
};

/// Projection onto the observed support: observed entries copied, others zeroed.
template <typename Derived>
Matrix<typename Derived::Scalar> project(const Eigen::MatrixBase<Derived>& y, const ObservationMask& mask) {
    using Scalar = typename Derived::Scalar;
    if (y.rows() != mask.rows() || y.cols() != mask.cols())
        throw ShapeError("project: matrix " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                         " vs mask " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()));
    return mask.array().select(y.derived(), Matrix<Scalar>::Zero(y.rows(), y.cols()));
}

/// Overwrites the observed entries of `z` with those of `y`.
template <typename Scalar, typename Derived>
void restore_observed(Matrix<Scalar>& z, const Eigen::MatrixBase<Derived>& y, const ObservationMask& mask) {
    if (z.rows() != mask.rows() || z.cols() != mask.cols() || y.rows() != mask.rows() || y.cols() != mask.cols())
        throw ShapeError("restore_observed: shape mismatch");
    z = mask.array().select(y.derived(), z);
}

}  // namespace latc
