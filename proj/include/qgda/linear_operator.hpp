#pragma once

// Linear operators consumed by the CGNS moment equations. Each one can act on
// a vector, act on the columns of a dense matrix, act transposed, and report
// the squared norms of its columns (what the diagonal covariance backend needs).

#include <Eigen/Sparse>

#include <concepts>
#include <memory>
#include <utility>

#include "qgda/grid.hpp"
#include "qgda/helmholtz.hpp"

namespace qgda {

template <class Op>
concept LinearOperator = requires(const Op& op, const Vector& v, const Matrix& m) {
    { op.rows() } -> std::convertible_to<Eigen::Index>;
    { op.cols() } -> std::convertible_to<Eigen::Index>;
    { op.apply(v) } -> std::convertible_to<Vector>;
    { op.apply_transpose(v) } -> std::convertible_to<Vector>;
    { op.apply(m) } -> std::convertible_to<Matrix>;
    { op.squared_column_norms() } -> std::convertible_to<Vector>;
    { op.diagonal() } -> std::convertible_to<Vector>;
};

class ZeroOperator {
public:
    ZeroOperator(Eigen::Index rows, Eigen::Index cols) : rows_(rows), cols_(cols) {}

    Eigen::Index rows() const noexcept { return rows_; }
    Eigen::Index cols() const noexcept { return cols_; }
    Vector apply(const Vector&) const { return Vector::Zero(rows_); }
    Vector apply_transpose(const Vector&) const { return Vector::Zero(cols_); }
    Matrix apply(const Matrix& m) const { return Matrix::Zero(rows_, m.cols()); }
    Vector squared_column_norms() const { return Vector::Zero(cols_); }
    Vector diagonal() const { return Vector::Zero(std::min(rows_, cols_)); }
    bool is_zero() const noexcept { return true; }

private:
    Eigen::Index rows_, cols_;
};

class DenseOperator {
public:
    explicit DenseOperator(Matrix m) : m_(std::move(m)) {}

    Eigen::Index rows() const noexcept { return m_.rows(); }
    Eigen::Index cols() const noexcept { return m_.cols(); }
    Vector apply(const Vector& v) const { return m_ * v; }
    Vector apply_transpose(const Vector& v) const { return m_.transpose() * v; }
    Matrix apply(const Matrix& x) const { return m_ * x; }
    Vector squared_column_norms() const { return m_.colwise().squaredNorm().transpose(); }
    Vector diagonal() const { return m_.diagonal(); }
    const Matrix& matrix() const noexcept { return m_; }

private:
    Matrix m_;
};

class SparseOperator {
public:
    explicit SparseOperator(SparseMatrix m) : m_(std::move(m)) { m_.makeCompressed(); }

    Eigen::Index rows() const noexcept { return m_.rows(); }
    Eigen::Index cols() const noexcept { return m_.cols(); }
    Vector apply(const Vector& v) const { return m_ * v; }
    Vector apply_transpose(const Vector& v) const { return m_.transpose() * v; }
    Matrix apply(const Matrix& x) const { return m_ * x; }
    Vector squared_column_norms() const {
        Vector out = Vector::Zero(m_.cols());
        for (Eigen::Index c = 0; c < m_.outerSize(); ++c)
            for (SparseMatrix::InnerIterator it(m_, c); it; ++it) out[it.col()] += it.value() * it.value();
        return out;
    }
    Vector diagonal() const { return m_.diagonal(); }
    const SparseMatrix& matrix() const noexcept { return m_; }

private:
    SparseMatrix m_;
};

/// scale * A^{-1} for the Helmholtz operator A, applied through its factorization.
/// A is symmetric, so the transpose action is the same solve.
class ScaledHelmholtzInverse {
public:
    ScaledHelmholtzInverse(double scale, HelmholtzOperator op, bool precompute_column_norms = false)
        : scale_(scale), op_(std::move(op)) {
        if (precompute_column_norms)
            column_norms_ = std::make_shared<const Vector>(op_.inverse_squared_column_norms());
    }

    Eigen::Index rows() const noexcept { return op_.matrix().rows(); }
    Eigen::Index cols() const noexcept { return op_.matrix().cols(); }
    double scale() const noexcept { return scale_; }
    const HelmholtzOperator& helmholtz() const noexcept { return op_; }

    Vector apply(const Vector& v) const { return scale_ * op_.solve(v); }
    Vector apply_transpose(const Vector& v) const { return apply(v); }
    Matrix apply(const Matrix& x) const { return scale_ * op_.solve(x); }

    Vector squared_column_norms() const {
        if (column_norms_) return scale_ * scale_ * *column_norms_;
        return scale_ * scale_ * op_.inverse_squared_column_norms();
    }

    Vector diagonal() const {
        Vector out(cols());
        Vector e = Vector::Zero(cols());
        for (Eigen::Index i = 0; i < cols(); ++i) {
            e[i] = 1.0;
            out[i] = apply(e)[i];
            e[i] = 0.0;
        }
        return out;
    }

private:
    double scale_;
    HelmholtzOperator op_;
    std::shared_ptr<const Vector> column_norms_;
};

static_assert(LinearOperator<ZeroOperator>);
static_assert(LinearOperator<DenseOperator>);
static_assert(LinearOperator<SparseOperator>);
static_assert(LinearOperator<ScaledHelmholtzInverse>);

}  // namespace qgda
