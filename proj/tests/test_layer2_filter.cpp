#include <gtest/gtest.h>

#include "qgda/layer2_filter.hpp"
#include "qgda/metrics.hpp"
#include "test_support.hpp"

using namespace qgda;

namespace {

const Smoothing off{.width = 5, .interval = 0};

std::vector<QGState> unsmoothed_trajectory(int n, int steps) {
    TruthSolver solver(GridSpec(n), PhysParams{}, InitialCondition::sinusoidal, off);
    std::vector<QGState> out{solver.state()};
    for (int i = 0; i < steps; ++i) out.push_back(solver.step());
    return out;
}

}  // namespace

TEST(Layer2Model, StateDriftIsZeroOperator) {
    GridSpec g(6);
    const PhysParams p;
    const auto op = assemble_helmholtz(g, p.kd2);
    const auto s = init_state(g, p, InitialCondition::gaussian);
    const auto hist = layer2_history(s.psi1, s.psi1, s.psi1, s.psi2, p);
    const auto mats = assemble_layer2_mats(hist, op, p, NoiseConfig{});
    EXPECT_TRUE(mats.a1.is_zero());
    EXPECT_EQ(mats.a1.apply(test::random_field(g, 1).values()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(mats.obs_dim(), 36);
    EXPECT_EQ(mats.state_dim(), 36);
}

TEST(Layer2Model, ObservationOperatorSolvesHelmholtz) {
    for (int n : {4, 10, 20}) {
        GridSpec g(n);
        const PhysParams p;
        const auto op = assemble_helmholtz(g, p.kd2);
        const Layer2Model model(op, p, false);
        const Vector v = test::random_field(g, 5u + n).values();
        const Vector x = model.A1().apply(v);
        const double scale = -(g.h() * g.h() * p.kd2) / (2 * p.dt);
        EXPECT_LT((op.matrix() * x - scale * v).cwiseAbs().maxCoeff(), 1e-9 * std::abs(scale)) << "n=" << n;
        EXPECT_LT((model.A1().apply_transpose(v) - x).cwiseAbs().maxCoeff(), 1e-12 * x.cwiseAbs().maxCoeff());
    }
}

TEST(Layer2Model, ConstantModeEigenvalueIsInverseDt) {
    GridSpec g(10);
    const PhysParams p;
    const Layer2Model model(assemble_helmholtz(g, p.kd2), p, false);
    const Vector ones = Vector::Ones(100);
    EXPECT_LT((model.A1().apply(ones) - ones / p.dt).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Layer2Model, PrecomputedColumnNormsMatchDense) {
    GridSpec g(5);
    const PhysParams p;
    const auto op = assemble_helmholtz(g, p.kd2);
    const Layer2Model fast(op, p, true), slow(op, p, false);
    Matrix dense(25, 25);
    for (int i = 0; i < 25; ++i) dense.col(i) = slow.A1().apply(Vector(Vector::Unit(25, i)));
    const Vector expected = dense.colwise().squaredNorm().transpose();
    EXPECT_LT((fast.A1().squared_column_norms() - expected).cwiseAbs().maxCoeff(), 1e-9 * expected.maxCoeff());
    EXPECT_LT((slow.A1().squared_column_norms() - expected).cwiseAbs().maxCoeff(), 1e-9 * expected.maxCoeff());
    EXPECT_LT((slow.A1().diagonal() - dense.diagonal()).cwiseAbs().maxCoeff(), 1e-9 * expected.maxCoeff());
}

TEST(Layer2Model, SteadyHistoryPredictsNoChange) {
    GridSpec g(8);
    const PhysParams p;
    const auto op = assemble_helmholtz(g, p.kd2);
    const auto psi1 = test::smooth_random_field(g, 11), psi2 = test::smooth_random_field(g, 12);
    const auto q1 = diagnose_layer(psi1, psi2, p), q2 = diagnose_layer(psi2, psi1, p);
    const Layer2History hist{psi1, psi1, psi2, q1, q1, q2, q2};
    const auto mats = assemble_layer2_mats(hist, op, p, NoiseConfig{});
    EXPECT_LT(mats.a0.cwiseAbs().maxCoeff(), 1e-10);
    const Vector drift = mats.A0 + mats.A1.apply(psi2.values());
    EXPECT_LT(drift.cwiseAbs().maxCoeff(), 1e-6 * mats.A0.cwiseAbs().maxCoeff());
}

TEST(Layer2Model, TelescopesAlongTruthTrajectory) {
    // With the true psi2 history the assembled drifts reproduce both
    // streamfunction increments of an unsmoothed truth run.
    const PhysParams p;
    const auto states = unsmoothed_trajectory(10, 6);
    const auto op = assemble_helmholtz(GridSpec(10), p.kd2);
    for (int n = 2; n <= 5; ++n) {
        const auto hist = layer2_history(states[n].psi1, states[n - 1].psi1, states[n - 2].psi1,
                                         states[n - 1].psi2, p);
        const auto mats = assemble_layer2_mats(hist, op, p, NoiseConfig{});
        const Vector dpsi1 = states[n + 1].psi1.values() - states[n].psi1.values();
        const Vector pred1 = p.dt * (mats.A0 + mats.A1.apply(states[n].psi2.values()));
        EXPECT_LT((pred1 - dpsi1).cwiseAbs().maxCoeff(), 1e-10) << "n=" << n;
        const Vector dpsi2 = states[n].psi2.values() - states[n - 1].psi2.values();
        EXPECT_LT((p.dt * mats.a0 - dpsi2).cwiseAbs().maxCoeff(), 1e-10) << "n=" << n;
    }
}

TEST(Layer2Filter, SmallGridRecovery) {
    Layer2FilterConfig cfg;
    cfg.params.n_steps = 500;
    const auto res = run_layer2_filter(cfg);
    ASSERT_FALSE(res.snapshots.empty());
    EXPECT_EQ(res.snapshots.back().step, 500);
    EXPECT_EQ(res.spinup_steps, 5);
    const auto& last = res.snapshots.back();
    EXPECT_LT(rmse(last.mean, last.truth), 1.0);
    EXPECT_GT(corr(last.mean, last.truth), 0.9);
}

TEST(Layer2Filter, CovarianceIndependentOfObservationSeed) {
    Layer2FilterConfig cfg;
    cfg.grid = GridSpec(6);
    cfg.params.n_steps = 300;
    cfg.cov_mode = CovMode::dense;
    const auto a = run_layer2_filter(cfg);
    cfg.noise.seed = 99;
    const auto b = run_layer2_filter(cfg);
    EXPECT_EQ(a.final_moments.cov_dense, b.final_moments.cov_dense);
    EXPECT_NE(a.final_moments.mu, b.final_moments.mu);
}

TEST(Layer2Filter, DenseCovarianceStaysSymmetricPositive) {
    Layer2FilterConfig cfg;
    cfg.grid = GridSpec(6);
    cfg.params.n_steps = 1000;
    cfg.cov_mode = CovMode::dense;
    const auto res = run_layer2_filter(cfg);
    const Matrix& R = res.final_moments.cov_dense;
    EXPECT_EQ(R, R.transpose());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(R).eigenvalues().minCoeff(), -1e-12);
}

TEST(Layer2Filter, Deterministic) {
    Layer2FilterConfig cfg;
    cfg.grid = GridSpec(8);
    cfg.params.n_steps = 300;
    EXPECT_EQ(run_layer2_filter(cfg).final_moments.mu, run_layer2_filter(cfg).final_moments.mu);
}

TEST(Layer2Filter, RejectsShortRunUp) {
    Layer2FilterConfig cfg;
    cfg.params.n_steps = 200;
    EXPECT_THROW(run_layer2_filter(cfg), ConfigError);
    cfg.params.n_steps = 201;
    EXPECT_NO_THROW(run_layer2_filter(cfg));
}
