#pragma once

// Conditional Gaussian nonlinear system (CGNS) filter core.
//
//   dX = (A0 + A1 Y) dt + B1 dW1
//   dY = (a0 + a1 Y) dt + b2 dW2
//
// Given the observed path X, the conditional law of Y is Gaussian with mean
// mu and covariance R obeying
//
//   dmu = (a0 + a1 mu) dt + R A1^T (B1 B1^T)^{-1} (dX - (A0 + A1 mu) dt)
//   dR  = [a1 R + R a1^T + b2 b2^T - R A1^T (B1 B1^T)^{-1} A1 R] dt
//
// Both are stepped with forward Euler. B1 and b2 are scalar amplitudes, so
// (B1 B1^T)^{-1} = I / B1^2 and b2 b2^T = b2^2 I.
//
// Two covariance backends: dense (full m x m matrix, for small grids) and
// diagonal (per-component variances; quadratic terms keep only their diagonal).

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "qgda/linear_operator.hpp"

namespace qgda {

enum class CovMode { dense, diagonal };

inline CovMode parse_cov_mode(std::string_view s) {
    if (s == "dense") return CovMode::dense;
    if (s == "diagonal") return CovMode::diagonal;
    throw ConfigError("unknown cov_mode '" + std::string(s) + "' (expected dense|diagonal)");
}

inline std::string to_string(CovMode m) { return m == CovMode::dense ? "dense" : "diagonal"; }

struct NoiseConfig {
    std::uint64_t seed = 1;
    double B1 = std::sqrt(5.0);
    double b2 = 0.1;

    void validate() const {
        if (!(B1 > 0.0)) throw ConfigError("B1 must be > 0");
        if (!(b2 >= 0.0)) throw ConfigError("b2 must be >= 0");
    }
};

using Rng = std::mt19937_64;

/// Independent, reproducible stream `stream` derived from `seed`.
inline Rng make_stream(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                      0x9e3779b9u};
    return Rng(seq);
}

/// i.i.d. N(0,1) * amplitude * sqrt(dt).
inline Vector sample_increment(Rng& rng, Eigen::Index dim, double amplitude, double dt) {
    if (!(dt > 0.0)) throw ConfigError("sample_increment: dt must be > 0");
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = amplitude * std::sqrt(dt);
    Vector out(dim);
    for (Eigen::Index i = 0; i < dim; ++i) out[i] = normal(rng) * scale;
    return out;
}

template <LinearOperator ObsOp, LinearOperator StateOp>
struct CGNSMatrices {
    Vector A0;   // m_x
    ObsOp A1;    // m_x x m_y
    Vector a0;   // m_y
    StateOp a1;  // m_y x m_y
    double B1 = 1.0;
    double b2 = 0.0;

    Eigen::Index obs_dim() const { return A0.size(); }
    Eigen::Index state_dim() const { return a0.size(); }

    void validate() const {
        if (!(B1 > 0.0)) throw ConfigError("CGNS: B1 must be > 0");
        if (A1.rows() != A0.size() || A1.cols() != a0.size() || a1.rows() != a0.size() || a1.cols() != a0.size())
            throw ConfigError("CGNS: inconsistent operator dimensions");
    }
};

struct FilterMoments {
    Vector mu;
    CovMode mode = CovMode::diagonal;
    Matrix cov_dense;  // used when mode == dense
    Vector cov_diag;   // used when mode == diagonal

    static FilterMoments dense(Vector mu, Matrix cov) {
        return FilterMoments{std::move(mu), CovMode::dense, std::move(cov), Vector()};
    }
    static FilterMoments diagonal(Vector mu, Vector var) {
        return FilterMoments{std::move(mu), CovMode::diagonal, Matrix(), std::move(var)};
    }

    Eigen::Index dim() const noexcept { return mu.size(); }

    Vector variances() const { return mode == CovMode::dense ? Vector(cov_dense.diagonal()) : cov_diag; }

    /// R v
    Vector cov_times(const Vector& v) const {
        return mode == CovMode::dense ? Vector(cov_dense * v) : Vector(cov_diag.cwiseProduct(v));
    }
};

/// One Euler step of the conditional mean. Uses the covariance held in `m`
/// (i.e. the pre-update R).
template <LinearOperator ObsOp, LinearOperator StateOp>
Vector update_mean(const FilterMoments& m, const CGNSMatrices<ObsOp, StateOp>& mats, const Vector& dX, double dt) {
    if (dX.size() != mats.obs_dim() || m.dim() != mats.state_dim())
        throw ConfigError("update_mean: dimension mismatch");
    const Vector innovation = dX - (mats.A0 + mats.A1.apply(m.mu)) * dt;
    const Vector weighted = mats.A1.apply_transpose(innovation) / (mats.B1 * mats.B1);
    Vector mu = m.mu + (mats.a0 + mats.a1.apply(m.mu)) * dt + m.cov_times(weighted);
    if (!mu.allFinite()) throw DivergenceError("CGNS: non-finite posterior mean");
    return mu;
}

/// One Euler step of the Riccati equation, returned in the same representation.
/// Dense results are symmetrized; negative variances are clipped at zero.
template <LinearOperator ObsOp, LinearOperator StateOp>
FilterMoments update_cov(const FilterMoments& m, const CGNSMatrices<ObsOp, StateOp>& mats, double dt) {
    const double inv_B1sq = 1.0 / (mats.B1 * mats.B1);
    const double b2sq = mats.b2 * mats.b2;
    FilterMoments out = m;
    if (m.mode == CovMode::dense) {
        const Matrix& R = m.cov_dense;
        const Matrix a1R = mats.a1.apply(R);
        const Matrix A1R = mats.A1.apply(R);
        Matrix dR = a1R + a1R.transpose() - inv_B1sq * (A1R.transpose() * A1R);
        dR.diagonal().array() += b2sq;
        Matrix next = R + dt * dR;
        out.cov_dense = 0.5 * (next + next.transpose());
        out.cov_dense.diagonal() = out.cov_dense.diagonal().cwiseMax(0.0);
        if (!out.cov_dense.allFinite()) throw DivergenceError("CGNS: non-finite covariance");
    } else {
        const Vector& r = m.cov_diag;
        const Vector a1_diag = mats.a1.diagonal();
        const Vector A1_norms = mats.A1.squared_column_norms();
        const Vector dR = (2.0 * a1_diag.cwiseProduct(r)).array() + b2sq -
                          inv_B1sq * (r.cwiseProduct(r).cwiseProduct(A1_norms)).array();
        out.cov_diag = (r + dt * dR).cwiseMax(0.0);
        if (!out.cov_diag.allFinite()) throw DivergenceError("CGNS: non-finite covariance");
    }
    return out;
}

/// Joint step: mean with the pre-update covariance, then covariance.
template <LinearOperator ObsOp, LinearOperator StateOp>
void cgns_step(FilterMoments& m, const CGNSMatrices<ObsOp, StateOp>& mats, const Vector& dX, double dt) {
    Vector mu = update_mean(m, mats, dX, dt);
    m = update_cov(m, mats, dt);
    m.mu = std::move(mu);
}

/// Initial moments from a run-up window: mean = last sample, covariance =
/// unbiased sample covariance (divisor N - 1) of the window.
inline FilterMoments spinup_covariance(std::span<const Vector> samples, CovMode mode) {
    if (samples.size() < 2)
        throw ConfigError("spinup_covariance: need at least 2 samples, got " + std::to_string(samples.size()));
    const Eigen::Index dim = samples.front().size();
    Vector mean = Vector::Zero(dim);
    for (const Vector& s : samples) {
        if (s.size() != dim) throw ConfigError("spinup_covariance: ragged samples");
        mean += s;
    }
    mean /= static_cast<double>(samples.size());
    const double denom = static_cast<double>(samples.size() - 1);

    if (mode == CovMode::dense) {
        Matrix cov = Matrix::Zero(dim, dim);
        for (const Vector& s : samples) {
            const Vector d = s - mean;
            cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
        }
        Matrix full = cov.selfadjointView<Eigen::Lower>();
        return FilterMoments::dense(samples.back(), full / denom);
    }
    Vector var = Vector::Zero(dim);
    for (const Vector& s : samples) var += (s - mean).cwiseAbs2();
    return FilterMoments::diagonal(samples.back(), var / denom);
}

}  // namespace qgda
