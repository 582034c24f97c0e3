#pragma once

// Vorticity recovery: observe both streamfunctions X = [psi1; psi2] and
// filter both potential vorticities Y = [q1; q2].
//
//   dY = a1 Y dt + b2 dW2,          a1 Y = [-J(psi1, q1); -J(psi2, q2)]
//   dX = (A0 + A1 Y) dt + B1 dW1,   A1 = (2/kd2) [0 I; I 0] a1
//   A0_i = d/dt (psi_j - (2/kd2) Lap psi_j),   j = 3 - i
//
// The layer swap comes from solving the PV inversion for the partner
// layer's psi, which is the only term not hidden behind a Laplacian.

#include <cmath>
#include <functional>
#include <vector>

#include "qgda/cgns.hpp"
#include "qgda/qg_model.hpp"

namespace qgda {

/// Layer 1 cells followed by layer 2 cells.
inline Vector stack(const ScalarField& layer1, const ScalarField& layer2) {
    layer1.check_same_grid(layer2, "stack");
    Vector out(layer1.values().size() * 2);
    out << layer1.values(), layer2.values();
    return out;
}

inline std::pair<ScalarField, ScalarField> unstack(const GridSpec& grid, const Vector& v) {
    const auto m = static_cast<Eigen::Index>(grid.cells());
    if (v.size() != 2 * m) throw ConfigError("unstack: expected " + std::to_string(2 * m) + " entries");
    return {ScalarField(grid, v.head(m)), ScalarField(grid, v.tail(m))};
}

/// Sparse n^2 x n^2 matrix M(psi) with M(psi) vec(q) = -vec(J(psi, q)).
inline SparseMatrix advection_matrix(const ScalarField& psi) {
    const GridSpec& g = psi.grid();
    const int n = g.n();
    const double inv4h2 = 1.0 / (4.0 * g.h() * g.h());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(4 * g.cells());
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
            const auto row = static_cast<Eigen::Index>(g.index(k, l));
            const double psi_y = psi.at(k, l + 1) - psi.at(k, l - 1);
            const double psi_x = psi.at(k + 1, l) - psi.at(k - 1, l);
            entries.emplace_back(row, g.index(g.wrap(k + 1), l), psi_y * inv4h2);
            entries.emplace_back(row, g.index(g.wrap(k - 1), l), -psi_y * inv4h2);
            entries.emplace_back(row, g.index(k, g.wrap(l + 1)), -psi_x * inv4h2);
            entries.emplace_back(row, g.index(k, g.wrap(l - 1)), psi_x * inv4h2);
        }
    }
    const auto m = static_cast<Eigen::Index>(g.cells());
    SparseMatrix out(m, m);
    out.setFromTriplets(entries.begin(), entries.end());
    out.prune(0.0);
    return out;
}

/// Block-diagonal a1 over the stacked two-layer state.
inline SparseOperator assemble_a1_advection(const ScalarField& psi1, const ScalarField& psi2) {
    psi1.check_same_grid(psi2, "assemble_a1_advection");
    const SparseMatrix b1 = advection_matrix(psi1);
    const SparseMatrix b2 = advection_matrix(psi2);
    const Eigen::Index m = b1.rows();
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(b1.nonZeros() + b2.nonZeros());
    for (Eigen::Index c = 0; c < m; ++c) {
        for (SparseMatrix::InnerIterator it(b1, c); it; ++it) entries.emplace_back(it.row(), it.col(), it.value());
        for (SparseMatrix::InnerIterator it(b2, c); it; ++it)
            entries.emplace_back(it.row() + m, it.col() + m, it.value());
    }
    SparseMatrix out(2 * m, 2 * m);
    out.setFromTriplets(entries.begin(), entries.end());
    return SparseOperator(std::move(out));
}

/// (2/kd2) [0 I; I 0] on the stacked state.
inline SparseMatrix layer_swap(Eigen::Index cells_per_layer, double kd2) {
    const double s = 2.0 / kd2;
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(2 * cells_per_layer);
    for (Eigen::Index i = 0; i < cells_per_layer; ++i) {
        entries.emplace_back(i, i + cells_per_layer, s);
        entries.emplace_back(i + cells_per_layer, i, s);
    }
    SparseMatrix out(2 * cells_per_layer, 2 * cells_per_layer);
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
}

using VorticityMatrices = CGNSMatrices<SparseOperator, SparseOperator>;

/// Matrices at the current step. A0 is the backward difference of the
/// observed streamfunctions between prev and cur; a1 uses cur's psi.
inline VorticityMatrices assemble_vorticity_mats(const QGState& prev, const QGState& cur, const PhysParams& params,
                                                 const NoiseConfig& noise) {
    if (!(prev.grid() == cur.grid())) throw ConfigError("assemble_vorticity_mats: grid mismatch");
    const double s = 2.0 / params.kd2;
    auto balance = [s](const ScalarField& psi) { return psi - s * laplacian(psi); };
    // Row block i is driven by the partner layer j.
    const ScalarField d1 = (balance(cur.psi2) - balance(prev.psi2)) * (1.0 / params.dt);
    const ScalarField d2 = (balance(cur.psi1) - balance(prev.psi1)) * (1.0 / params.dt);

    SparseOperator a1 = assemble_a1_advection(cur.psi1, cur.psi2);
    const auto m = static_cast<Eigen::Index>(cur.grid().cells());
    SparseMatrix A1 = layer_swap(m, params.kd2) * a1.matrix();

    VorticityMatrices mats{stack(d1, d2), SparseOperator(std::move(A1)), Vector::Zero(2 * m), std::move(a1),
                           noise.B1, noise.b2};
    mats.validate();
    return mats;
}

struct FilterSnapshot {
    long step = 0;
    Vector truth;  // the hidden variable from the truth run
    Vector mean;   // posterior mean
};

struct FilterResult {
    QGState final_truth;
    FilterMoments final_moments;
    std::vector<FilterSnapshot> snapshots;
    long spinup_steps = 0;
};

/// Run-up window length: 1% of the run, rounded up.
inline long spinup_length(long n_steps) { return (n_steps + 99) / 100; }

struct VorticityFilterConfig {
    GridSpec grid{10};
    PhysParams params;
    NoiseConfig noise;
    CovMode cov_mode = CovMode::diagonal;
    InitialCondition ic = InitialCondition::sinusoidal;
    Smoothing smoothing;
    long snapshot_stride = 100;
};

using FilterObserver = std::function<void(const QGState& truth, const FilterMoments& moments)>;

inline FilterResult run_vorticity_filter(const VorticityFilterConfig& cfg, const FilterObserver& observer = {}) {
    cfg.params.validate();
    cfg.noise.validate();
    if (cfg.snapshot_stride < 1) throw ConfigError("snapshot_stride must be >= 1");
    const long n_steps = cfg.params.n_steps;
    const long spin = spinup_length(n_steps);
    if (spin < 2)
        throw ConfigError("vorticity filter: run-up window of " + std::to_string(spin) +
                          " step(s) is too short; need n_steps > 100");

    TruthSolver truth(cfg.grid, cfg.params, cfg.ic, cfg.smoothing);
    std::vector<Vector> window;
    window.reserve(static_cast<std::size_t>(spin));
    QGState prev = truth.state();
    window.push_back(stack(prev.q1, prev.q2));
    for (long i = 1; i < spin; ++i) {
        prev = truth.state();
        truth.step();
        window.push_back(stack(truth.state().q1, truth.state().q2));
    }

    FilterResult result{truth.state(), spinup_covariance(window, cfg.cov_mode), {}, spin};
    window.clear();
    auto record = [&](const QGState& s, const FilterMoments& m) {
        if (s.step % cfg.snapshot_stride == 0 || s.step == n_steps)
            result.snapshots.push_back({s.step, stack(s.q1, s.q2), m.mu});
        if (observer) observer(s, m);
    };
    record(truth.state(), result.final_moments);

    Rng obs_rng = make_stream(cfg.noise.seed, 1);
    FilterMoments& moments = result.final_moments;
    const double dt = cfg.params.dt;
    while (truth.state().step < n_steps) {
        const QGState cur = truth.state();
        const VorticityMatrices mats = assemble_vorticity_mats(prev, cur, cfg.params, cfg.noise);
        const QGState& next = truth.step();
        const Vector dX = stack(next.psi1, next.psi2) - stack(cur.psi1, cur.psi2) +
                          sample_increment(obs_rng, mats.obs_dim(), cfg.noise.B1, dt);
        try {
            cgns_step(moments, mats, dX, dt);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.what(), next.step);
        }
        prev = cur;
        record(next, moments);
    }
    result.final_truth = truth.state();
    return result;
}

}  // namespace qgda
