#pragma once

// Second-layer recovery: observe psi1 only, filter Y = psi2.
//
// Both streamfunction increments are written through the Helmholtz inverse
// the truth solver uses (A psi_i = h^2 (q_i - beta y - kd2/2 psi_j)):
//
//   dpsi1 = h^2 A^{-1} (q1^{n+1} - q1^n - kd2/2 (psi2^n - psi2^{n-1}))
//   dpsi2 = h^2 A^{-1} (q2^n - q2^{n-1} - kd2/2 (psi1^{n-1} - psi1^{n-2}))
//
// psi2's increment is taken one step back because q2^{n+1} would need the
// unknown psi2^{n+1}. Already-estimated psi2 values count as known, so
//
//   A0 = (h^2/dt) A^{-1} (q1^{n+1} - q1^n + kd2/2 psi2^{n-1}),   A1 = -(h^2 kd2 / (2 dt)) A^{-1}
//   a0 = (h^2/dt) A^{-1} (q2^n - q2^{n-1} - kd2/2 (psi1^{n-1} - psi1^{n-2})),   a1 = 0

#include <vector>

#include "qgda/vorticity_filter.hpp"

namespace qgda {

/// Fields entering one assembly, indexed relative to the current step n.
struct Layer2History {
    ScalarField psi1_prev;   // psi1^{n-1}
    ScalarField psi1_prev2;  // psi1^{n-2}
    ScalarField psi2_prev;   // psi2^{n-1}
    ScalarField q1_cur;      // q1^n
    ScalarField q1_next;     // q1^{n+1}
    ScalarField q2_prev;     // q2^{n-1}
    ScalarField q2_cur;      // q2^n
};

using Layer2Matrices = CGNSMatrices<ScaledHelmholtzInverse, ZeroOperator>;

/// Holds the step-invariant pieces (the factorization and A1).
class Layer2Model {
public:
    Layer2Model(const HelmholtzOperator& op, const PhysParams& params, bool precompute_column_norms)
        : op_(op),
          params_(params),
          A1_(-(op.grid().h() * op.grid().h() * params.kd2) / (2.0 * params.dt), op, precompute_column_norms) {}

    const ScaledHelmholtzInverse& A1() const noexcept { return A1_; }
    const HelmholtzOperator& helmholtz() const noexcept { return op_; }

    Layer2Matrices assemble(const Layer2History& hist, const NoiseConfig& noise) const {
        const GridSpec& g = op_.grid();
        const double scale = g.h() * g.h() / params_.dt;
        const double half_kd2 = params_.kd2 / 2.0;

        const Vector rhs_obs = hist.q1_next.values() - hist.q1_cur.values() + half_kd2 * hist.psi2_prev.values();
        const Vector rhs_state = hist.q2_cur.values() - hist.q2_prev.values() -
                                 half_kd2 * (hist.psi1_prev.values() - hist.psi1_prev2.values());
        const auto m = static_cast<Eigen::Index>(g.cells());
        Layer2Matrices mats{scale * op_.solve(rhs_obs), A1_, scale * op_.solve(rhs_state), ZeroOperator(m, m),
                            noise.B1, noise.b2};
        mats.validate();
        return mats;
    }

private:
    HelmholtzOperator op_;
    PhysParams params_;
    ScaledHelmholtzInverse A1_;
};

inline Layer2Matrices assemble_layer2_mats(const Layer2History& hist, const HelmholtzOperator& op,
                                           const PhysParams& params, const NoiseConfig& noise) {
    return Layer2Model(op, params, false).assemble(hist, noise);
}

struct Layer2FilterConfig {
    GridSpec grid{10};
    PhysParams params;
    NoiseConfig noise;
    CovMode cov_mode = CovMode::diagonal;
    InitialCondition ic = InitialCondition::sinusoidal;
    Smoothing smoothing;
    long snapshot_stride = 100;
};

/// History for step n built from the observed psi1 and the running psi2
/// estimate. q1^n and q2^{n-1} are diagnosed with the lagged partner layer
/// (as the truth inversion couples them); q^{n+1} and q2^n come from one PV step.
inline Layer2History layer2_history(const ScalarField& psi1_cur, const ScalarField& psi1_prev,
                                    const ScalarField& psi1_prev2, const ScalarField& psi2_prev,
                                    const PhysParams& params) {
    ScalarField q1_cur = diagnose_layer(psi1_cur, psi2_prev, params);
    ScalarField q1_next = q1_cur - params.dt * jacobian(psi1_cur, q1_cur);
    ScalarField q2_prev = diagnose_layer(psi2_prev, psi1_prev2, params);
    ScalarField q2_cur = q2_prev - params.dt * jacobian(psi2_prev, q2_prev);
    return Layer2History{psi1_prev,         psi1_prev2,         psi2_prev,        std::move(q1_cur),
                         std::move(q1_next), std::move(q2_prev), std::move(q2_cur)};
}

inline FilterResult run_layer2_filter(const Layer2FilterConfig& cfg, const FilterObserver& observer = {}) {
    cfg.params.validate();
    cfg.noise.validate();
    if (cfg.snapshot_stride < 1) throw ConfigError("snapshot_stride must be >= 1");
    const long n_steps = cfg.params.n_steps;
    const long spin = spinup_length(n_steps);
    if (spin < 3)
        throw ConfigError("layer-2 filter: run-up window of " + std::to_string(spin) +
                          " step(s) is too short; need n_steps > 200 for the three-step history");

    TruthSolver truth(cfg.grid, cfg.params, cfg.ic, cfg.smoothing);
    const Layer2Model model(truth.helmholtz(), cfg.params, cfg.cov_mode == CovMode::diagonal);

    std::vector<Vector> window;
    window.reserve(static_cast<std::size_t>(spin));
    window.push_back(truth.state().psi2.values());
    ScalarField psi1_prev2 = truth.state().psi1, psi1_prev = truth.state().psi1;
    ScalarField psi2_prev = truth.state().psi2;
    for (long i = 1; i < spin; ++i) {
        psi1_prev2 = psi1_prev;
        psi1_prev = truth.state().psi1;
        psi2_prev = truth.state().psi2;
        truth.step();
        window.push_back(truth.state().psi2.values());
    }

    FilterResult result{truth.state(), spinup_covariance(window, cfg.cov_mode), {}, spin};
    window.clear();
    auto record = [&](const QGState& s, const FilterMoments& m) {
        if (s.step % cfg.snapshot_stride == 0 || s.step == n_steps)
            result.snapshots.push_back({s.step, s.psi2.values(), m.mu});
        if (observer) observer(s, m);
    };
    record(truth.state(), result.final_moments);

    Rng obs_rng = make_stream(cfg.noise.seed, 2);
    FilterMoments& moments = result.final_moments;
    const double dt = cfg.params.dt;
    while (truth.state().step < n_steps) {
        const ScalarField psi1_cur = truth.state().psi1;
        const Layer2History hist = layer2_history(psi1_cur, psi1_prev, psi1_prev2, psi2_prev, cfg.params);
        const Layer2Matrices mats = model.assemble(hist, cfg.noise);
        const QGState& next = truth.step();
        const Vector dX = next.psi1.values() - psi1_cur.values() +
                          sample_increment(obs_rng, mats.obs_dim(), cfg.noise.B1, dt);
        ScalarField mu_cur(cfg.grid, moments.mu);
        try {
            cgns_step(moments, mats, dX, dt);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.what(), next.step);
        }
        psi1_prev2 = std::move(psi1_prev);
        psi1_prev = psi1_cur;
        psi2_prev = std::move(mu_cur);
        record(next, moments);
    }
    result.final_truth = truth.state();
    return result;
}

}  // namespace qgda
