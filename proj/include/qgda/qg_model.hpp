#pragma once

// Deterministic two-layer quasi-geostrophic truth solver.
//
//   dq_i/dt + J(psi_i, q_i) = 0
//   q_i = Lap(psi_i) + beta y + kd2/2 (psi_j - psi_i),   j = 3 - i
//
// q is advanced by forward Euler; psi is recovered by Helmholtz inversion
// with the other layer's streamfunction lagged one step. Forward Euler with
// centred advection amplifies every mode, so the solver periodically applies
// a box filter to psi (q re-diagnosed) to keep grid-scale growth bounded.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qgda/grid.hpp"
#include "qgda/helmholtz.hpp"

namespace qgda {

struct PhysParams {
    double kd2 = 10.0;
    double beta = 0.1;
    double dt = 1e-4;
    long n_steps = 0;

    void validate() const {
        if (!(kd2 > 0.0)) throw ConfigError("kd2 must be > 0");
        if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
        if (n_steps < 0) throw ConfigError("n_steps must be >= 0");
    }
};

/// Box filter of odd `width` applied to psi whenever step % interval == 0
/// (step 0 included). interval == 0 disables it; interval < 0 selects
/// auto_interval(n), which tracks the n^2 growth rate of the Euler instability.
struct Smoothing {
    static constexpr long automatic = -1;

    int width = 5;
    long interval = automatic;

    /// 1000 steps at n = 50, scaled by (50/n)^2.
    static long auto_interval(int n) { return std::lround(1000.0 * (50.0 / n) * (50.0 / n)); }

    long interval_for(int n) const { return interval < 0 ? auto_interval(n) : interval; }
    bool enabled() const noexcept { return interval != 0 && width > 1; }
    void validate() const {
        if (width < 1 || width % 2 == 0) throw ConfigError("smoothing.width must be a positive odd integer");
        if (interval < automatic) throw ConfigError("smoothing.interval must be >= 0, or -1 for automatic");
    }
};

enum class InitialCondition { sinusoidal, gaussian };

inline InitialCondition parse_initial_condition(std::string_view tag) {
    if (tag == "sinusoidal") return InitialCondition::sinusoidal;
    if (tag == "gaussian") return InitialCondition::gaussian;
    throw ConfigError("unknown initial condition '" + std::string(tag) + "' (expected sinusoidal|gaussian)");
}

inline std::string to_string(InitialCondition ic) {
    return ic == InitialCondition::sinusoidal ? "sinusoidal" : "gaussian";
}

struct QGState {
    ScalarField psi1, psi2, q1, q2;
    long step = 0;

    const GridSpec& grid() const noexcept { return psi1.grid(); }
    bool all_finite() const noexcept {
        return psi1.all_finite() && psi2.all_finite() && q1.all_finite() && q2.all_finite();
    }
};

/// q_i from psi_i and the coupling partner psi_j.
inline ScalarField diagnose_layer(const ScalarField& psi_i, const ScalarField& psi_j, const PhysParams& params) {
    psi_i.check_same_grid(psi_j, "diagnose_q");
    const GridSpec& g = psi_i.grid();
    ScalarField q = laplacian(psi_i);
    const double half_kd2 = params.kd2 / 2.0;
    for (int k = 0; k < g.n(); ++k)
        for (int l = 0; l < g.n(); ++l)
            q(k, l) += params.beta * g.y(l) + half_kd2 * (psi_j(k, l) - psi_i(k, l));
    return q;
}

inline std::pair<ScalarField, ScalarField> diagnose_q(const ScalarField& psi1, const ScalarField& psi2,
                                                      const PhysParams& params) {
    return {diagnose_layer(psi1, psi2, params), diagnose_layer(psi2, psi1, params)};
}

inline QGState init_state(const GridSpec& grid, const PhysParams& params, InitialCondition ic) {
    constexpr double pi = 3.14159265358979323846;
    ScalarField psi1(grid), psi2(grid);
    switch (ic) {
        case InitialCondition::sinusoidal:
            psi1 = ScalarField::from_function(grid, [](double x, double y) {
                return -std::sin(1.2 * pi * x) * std::sin(1.5 * pi * y) +
                       0.6 * std::cos(2.3 * pi * x) * std::cos(2.8 * pi * y);
            });
            psi2 = ScalarField::from_function(grid, [](double x, double y) {
                return std::sin(3.1 * pi * x) * std::sin(0.8 * pi * y) +
                       0.7 * std::cos(1.6 * pi * x) * std::cos(2.4 * pi * y);
            });
            break;
        case InitialCondition::gaussian: {
            const double s2 = (1.0 / 8.0) * (1.0 / 8.0);
            psi1 = ScalarField::from_function(grid, [s2](double x, double y) {
                return std::exp(-(2.0 * (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / (2.0 * s2));
            });
            psi2 = ScalarField::from_function(grid, [s2](double x, double y) {
                return std::exp(-((x - 0.5) * (x - 0.5) + 4.0 * (y - 0.5) * (y - 0.5)) / (3.0 * s2));
            });
            break;
        }
    }
    auto [q1, q2] = diagnose_q(psi1, psi2, params);
    return QGState{std::move(psi1), std::move(psi2), std::move(q1), std::move(q2), 0};
}

/// Periodic width x width moving average.
inline ScalarField box_smooth(const ScalarField& f, int width) {
    if (width < 1 || width % 2 == 0) throw ConfigError("box_smooth: width must be a positive odd integer");
    const GridSpec& g = f.grid();
    const int n = g.n(), r = width / 2;
    // Separable: rows then columns.
    ScalarField tmp(g), out(g);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int a = -r; a <= r; ++a) s += f.at(k + a, l);
            tmp(k, l) = s / width;
        }
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int b = -r; b <= r; ++b) s += tmp.at(k, l + b);
            out(k, l) = s / width;
        }
    return out;
}

/// Smooths both streamfunctions and re-diagnoses q so the pair stays consistent.
inline void smooth_state(QGState& s, const PhysParams& params, int width) {
    s.psi1 = box_smooth(s.psi1, width);
    s.psi2 = box_smooth(s.psi2, width);
    auto [q1, q2] = diagnose_q(s.psi1, s.psi2, params);
    s.q1 = std::move(q1);
    s.q2 = std::move(q2);
}

/// Largest centred-difference velocity component over both layers.
inline double max_velocity(const QGState& s) {
    double u = 0.0;
    for (const ScalarField* psi : {&s.psi1, &s.psi2}) {
        u = std::max(u, central_diff(*psi, Axis::x).values().cwiseAbs().maxCoeff());
        u = std::max(u, central_diff(*psi, Axis::y).values().cwiseAbs().maxCoeff());
    }
    return u;
}

inline void check_cfl(const QGState& s, const PhysParams& params) {
    const double u_max = max_velocity(s);
    const double h = s.grid().h();
    if (!(u_max * params.dt / h <= 1.0)) {
        std::ostringstream msg;
        msg << "CFL violated: U_max=" << u_max << " dt=" << params.dt << " h=" << h
            << " (U_max*dt/h=" << u_max * params.dt / h << ")";
        throw DivergenceError(msg.str(), s.step);
    }
}

/// q_i^{n+1} = q_i^n - dt J(psi_i^n, q_i^n) for both layers.
inline std::pair<ScalarField, ScalarField> step_q(const QGState& s, const PhysParams& params,
                                                  bool enforce_cfl = true) {
    if (enforce_cfl) check_cfl(s, params);
    ScalarField q1 = s.q1 - params.dt * jacobian(s.psi1, s.q1);
    ScalarField q2 = s.q2 - params.dt * jacobian(s.psi2, s.q2);
    return {std::move(q1), std::move(q2)};
}

/// psi_i^{n+1} = invert(q_i^{n+1}, psi_j^n): the coupling uses the other layer's current psi.
inline std::pair<ScalarField, ScalarField> step_psi(const QGState& s,
                                                    const std::pair<ScalarField, ScalarField>& q_next,
                                                    const HelmholtzOperator& op, const PhysParams& params) {
    if (!q_next.first.all_finite() || !q_next.second.all_finite())
        throw DivergenceError("step_psi: non-finite potential vorticity", s.step);
    return {invert_psi(op, q_next.first, s.psi2, params.beta), invert_psi(op, q_next.second, s.psi1, params.beta)};
}

/// Stateful stepper. Owns the Helmholtz factorization.
class TruthSolver {
public:
    static constexpr long cfl_check_interval = 100;

    TruthSolver(const GridSpec& grid, const PhysParams& params, InitialCondition ic, Smoothing smoothing = {})
        : params_(params),
          smoothing_(smoothing),
          op_(assemble_helmholtz(grid, params.kd2)),
          state_(init_state(grid, params, ic)) {
        params_.validate();
        smoothing_.validate();
        maybe_smooth();
    }

    TruthSolver(const PhysParams& params, HelmholtzOperator op, QGState initial, Smoothing smoothing = {})
        : params_(params), smoothing_(smoothing), op_(std::move(op)), state_(std::move(initial)) {
        params_.validate();
        smoothing_.validate();
        maybe_smooth();
    }

    const QGState& state() const noexcept { return state_; }
    const HelmholtzOperator& helmholtz() const noexcept { return op_; }
    const PhysParams& params() const noexcept { return params_; }

    const QGState& step() {
        const bool periodic_check = state_.step % cfl_check_interval == 0;
        if (periodic_check && !state_.all_finite()) throw DivergenceError("truth: non-finite state", state_.step);
        auto q_next = step_q(state_, params_, periodic_check);
        auto psi_next = step_psi(state_, q_next, op_, params_);
        state_.psi1 = std::move(psi_next.first);
        state_.psi2 = std::move(psi_next.second);
        state_.q1 = std::move(q_next.first);
        state_.q2 = std::move(q_next.second);
        ++state_.step;
        maybe_smooth();
        return state_;
    }

    const Smoothing& smoothing() const noexcept { return smoothing_; }

private:
    void maybe_smooth() {
        if (smoothing_.enabled() && state_.step % smoothing_.interval_for(state_.grid().n()) == 0)
            smooth_state(state_, params_, smoothing_.width);
    }

    PhysParams params_;
    Smoothing smoothing_;
    HelmholtzOperator op_;
    QGState state_;
};

/// Runs params.n_steps steps; the observer sees every state including step 0.
inline void run_truth(const GridSpec& grid, const PhysParams& params, InitialCondition ic,
                      const std::function<void(const QGState&)>& observer, Smoothing smoothing = {}) {
    TruthSolver solver(grid, params, ic, smoothing);
    observer(solver.state());
    for (long i = 0; i < params.n_steps; ++i) observer(solver.step());
    if (!solver.state().all_finite()) throw DivergenceError("truth: non-finite state", solver.state().step);
}

/// Collects states 0..n_steps at the given stride (the last state is always kept).
inline std::vector<QGState> run_truth(const GridSpec& grid, const PhysParams& params, InitialCondition ic,
                                      long stride = 1, Smoothing smoothing = {}) {
    if (stride < 1) throw ConfigError("stride must be >= 1");
    std::vector<QGState> out;
    run_truth(
        grid, params, ic,
        [&](const QGState& s) {
            if (s.step % stride == 0 || s.step == params.n_steps) out.push_back(s);
        },
        smoothing);
    return out;
}

}  // namespace qgda
