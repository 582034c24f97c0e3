#pragma once

// Discrete periodic Helmholtz operator  A = h^2 (Laplacian - kd2/2)  with
// integer stencil weights: +1 on the four neighbours, D = -(4 + h^2 kd2 / 2)
// on the diagonal. The right-hand side of an inversion carries the h^2
// factor. A is step-invariant, so the factorization is done once.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <vector>

#include "qgda/grid.hpp"

namespace qgda {

using SparseMatrix = Eigen::SparseMatrix<double>;

class HelmholtzOperator {
public:
    const GridSpec& grid() const noexcept { return grid_; }
    double kd2() const noexcept { return kd2_; }
    double diagonal_entry() const noexcept { return -(4.0 + grid_.h() * grid_.h() * kd2_ / 2.0); }
    const SparseMatrix& matrix() const noexcept { return matrix_; }

    /// x = A^{-1} rhs.
    Vector solve(const Vector& rhs) const {
        Vector x = solver_->solve(rhs);
        if (solver_->info() != Eigen::Success) throw DivergenceError("helmholtz: solve failed");
        return x;
    }

    /// Column-wise A^{-1} B.
    Matrix solve(const Matrix& rhs) const {
        Matrix x = solver_->solve(rhs);
        if (solver_->info() != Eigen::Success) throw DivergenceError("helmholtz: solve failed");
        return x;
    }

    /// Diagonal of A^{-T} A^{-1}, i.e. squared column norms of the inverse.
    /// Costs one solve per cell; computed lazily and cached by the caller.
    Vector inverse_squared_column_norms() const {
        const Eigen::Index m = matrix_.rows();
        Vector out(m);
        Vector e = Vector::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            e[i] = 1.0;
            out[i] = solve(e).squaredNorm();
            e[i] = 0.0;
        }
        return out;
    }

    double residual_norm(const Vector& x, const Vector& rhs) const { return (matrix_ * x - rhs).norm(); }

private:
    friend HelmholtzOperator assemble_helmholtz(const GridSpec& grid, double kd2);

    HelmholtzOperator(const GridSpec& grid, double kd2) : grid_(grid), kd2_(kd2) {}

    GridSpec grid_;
    double kd2_;
    SparseMatrix matrix_;
    // Shared so the operator stays copyable; the factorization is never mutated after assembly.
    std::shared_ptr<const Eigen::SimplicialLDLT<SparseMatrix>> solver_;
};

inline HelmholtzOperator assemble_helmholtz(const GridSpec& grid, double kd2) {
    if (!(kd2 > 0.0))
        throw ConfigError("helmholtz: kd2 must be > 0 (diagonal dominance), got " + std::to_string(kd2));

    HelmholtzOperator op(grid, kd2);
    const int n = grid.n();
    const double diag = op.diagonal_entry();

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(grid.cells() * 5);
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
            const auto row = static_cast<Eigen::Index>(grid.index(k, l));
            entries.emplace_back(row, row, diag);
            entries.emplace_back(row, grid.index(grid.wrap(k + 1), l), 1.0);
            entries.emplace_back(row, grid.index(grid.wrap(k - 1), l), 1.0);
            entries.emplace_back(row, grid.index(k, grid.wrap(l + 1)), 1.0);
            entries.emplace_back(row, grid.index(k, grid.wrap(l - 1)), 1.0);
        }
    }
    const auto m = static_cast<Eigen::Index>(grid.cells());
    op.matrix_.resize(m, m);
    op.matrix_.setFromTriplets(entries.begin(), entries.end());
    op.matrix_.makeCompressed();

    auto solver = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
    solver->compute(op.matrix_);
    if (solver->info() != Eigen::Success) throw DivergenceError("helmholtz: factorization failed");
    op.solver_ = std::move(solver);
    return op;
}

/// Solves A psi = h^2 (q - beta y - kd2/2 psi_other) for psi.
inline ScalarField invert_psi(const HelmholtzOperator& op, const ScalarField& q, const ScalarField& psi_other,
                              double beta) {
    const GridSpec& g = op.grid();
    if (!(q.grid() == g) || !(psi_other.grid() == g)) throw ConfigError("invert_psi: grid mismatch");
    const int n = g.n();
    const double h2 = g.h() * g.h();
    const double half_kd2 = op.kd2() / 2.0;
    Vector rhs(g.cells());
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
            rhs[g.index(k, l)] = h2 * (q(k, l) - beta * g.y(l) - half_kd2 * psi_other(k, l));
    return ScalarField(g, op.solve(rhs));
}

}  // namespace qgda
