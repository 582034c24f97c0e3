#pragma once

// Uniform doubly periodic grid on the unit square and the second-order
// central-difference stencils used by the QG model.
//
// Node (k, l) sits at (x_k, y_l) = (k h, l h), k, l = 0..n-1, h = 1/n.
// Fields are stored row-major: flat index k * n + l.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

#include "qgda/error.hpp"

namespace qgda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Axis { x, y };

class GridSpec {
public:
    explicit GridSpec(int n) : n_(n), h_(1.0 / n) {
        if (n < 4) throw ConfigError("grid: n must be >= 4, got " + std::to_string(n));
    }

    int n() const noexcept { return n_; }
    double h() const noexcept { return h_; }
    std::size_t cells() const noexcept { return static_cast<std::size_t>(n_) * n_; }

    std::size_t index(int k, int l) const noexcept { return static_cast<std::size_t>(k) * n_ + l; }

    int wrap(int i) const noexcept {
        i %= n_;
        return i < 0 ? i + n_ : i;
    }

    double x(int k) const noexcept { return k * h_; }
    double y(int l) const noexcept { return l * h_; }

    friend bool operator==(const GridSpec& a, const GridSpec& b) noexcept { return a.n_ == b.n_; }

private:
    int n_;
    double h_;
};

class ScalarField {
public:
    explicit ScalarField(const GridSpec& grid) : grid_(grid), values_(Vector::Zero(grid.cells())) {}

    ScalarField(const GridSpec& grid, Vector values) : grid_(grid), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.size()) != grid_.cells())
            throw ConfigError("field: value count " + std::to_string(values_.size()) +
                              " does not match grid " + std::to_string(grid_.n()) + "x" +
                              std::to_string(grid_.n()));
    }

    template <class F>
    static ScalarField from_function(const GridSpec& grid, F&& f) {
        ScalarField out(grid);
        for (int k = 0; k < grid.n(); ++k)
            for (int l = 0; l < grid.n(); ++l) out(k, l) = f(grid.x(k), grid.y(l));
        return out;
    }

    static ScalarField constant(const GridSpec& grid, double c) {
        return ScalarField(grid, Vector::Constant(grid.cells(), c));
    }

    const GridSpec& grid() const noexcept { return grid_; }
    int n() const noexcept { return grid_.n(); }

    double& operator()(int k, int l) noexcept { return values_[grid_.index(k, l)]; }
    double operator()(int k, int l) const noexcept { return values_[grid_.index(k, l)]; }

    /// Periodic read: indices are wrapped mod n.
    double at(int k, int l) const noexcept { return values_[grid_.index(grid_.wrap(k), grid_.wrap(l))]; }

    const Vector& values() const noexcept { return values_; }
    Vector& values() noexcept { return values_; }

    bool all_finite() const noexcept { return values_.allFinite(); }

    ScalarField& operator+=(const ScalarField& o) {
        check_same_grid(o, "+=");
        values_ += o.values_;
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        check_same_grid(o, "-=");
        values_ -= o.values_;
        return *this;
    }
    ScalarField& operator*=(double s) {
        values_ *= s;
        return *this;
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
    friend ScalarField operator*(ScalarField a, double s) { return a *= s; }

    void check_same_grid(const ScalarField& o, const char* op) const {
        if (!(grid_ == o.grid_))
            throw ConfigError(std::string("field ") + op + ": grid mismatch (" +
                              std::to_string(grid_.n()) + " vs " + std::to_string(o.grid_.n()) + ")");
    }

private:
    GridSpec grid_;
    Vector values_;
};

/// y_l = l h at every node; the beta-plane term is beta * y_coordinate(grid).
inline ScalarField y_coordinate(const GridSpec& grid) {
    return ScalarField::from_function(grid, [](double, double y) { return y; });
}

inline ScalarField central_diff(const ScalarField& f, Axis axis) {
    const GridSpec& g = f.grid();
    const int n = g.n();
    const double inv2h = 1.0 / (2.0 * g.h());
    ScalarField out(g);
    for (int k = 0; k < n; ++k) {
        const int kp = k + 1 == n ? 0 : k + 1;
        const int km = k == 0 ? n - 1 : k - 1;
        for (int l = 0; l < n; ++l) {
            if (axis == Axis::x) {
                out(k, l) = (f(kp, l) - f(km, l)) * inv2h;
            } else {
                const int lp = l + 1 == n ? 0 : l + 1;
                const int lm = l == 0 ? n - 1 : l - 1;
                out(k, l) = (f(k, lp) - f(k, lm)) * inv2h;
            }
        }
    }
    return out;
}

/// Five-point Laplacian with periodic wrap.
inline ScalarField laplacian(const ScalarField& f) {
    const GridSpec& g = f.grid();
    const int n = g.n();
    const double inv_h2 = 1.0 / (g.h() * g.h());
    ScalarField out(g);
    for (int k = 0; k < n; ++k) {
        const int kp = k + 1 == n ? 0 : k + 1;
        const int km = k == 0 ? n - 1 : k - 1;
        for (int l = 0; l < n; ++l) {
            const int lp = l + 1 == n ? 0 : l + 1;
            const int lm = l == 0 ? n - 1 : l - 1;
            out(k, l) = (f(kp, l) + f(km, l) + f(k, lp) + f(k, lm) - 4.0 * f(k, l)) * inv_h2;
        }
    }
    return out;
}

/// J(psi, q) = psi_x q_y - psi_y q_x with centered differences on both factors.
inline ScalarField jacobian(const ScalarField& psi, const ScalarField& q) {
    psi.check_same_grid(q, "jacobian");
    const GridSpec& g = psi.grid();
    const int n = g.n();
    const double inv4h2 = 1.0 / (4.0 * g.h() * g.h());
    ScalarField out(g);
    for (int k = 0; k < n; ++k) {
        const int kp = k + 1 == n ? 0 : k + 1;
        const int km = k == 0 ? n - 1 : k - 1;
        for (int l = 0; l < n; ++l) {
            const int lp = l + 1 == n ? 0 : l + 1;
            const int lm = l == 0 ? n - 1 : l - 1;
            const double psi_x = psi(kp, l) - psi(km, l);
            const double psi_y = psi(k, lp) - psi(k, lm);
            const double q_x = q(kp, l) - q(km, l);
            const double q_y = q(k, lp) - q(k, lm);
            out(k, l) = (psi_x * q_y - psi_y * q_x) * inv4h2;
        }
    }
    return out;
}

}  // namespace qgda
