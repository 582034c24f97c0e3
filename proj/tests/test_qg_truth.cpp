#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "qgda/qg_model.hpp"
#include "test_support.hpp"

using namespace qgda;

namespace {

constexpr double pi = 3.14159265358979323846;
const Smoothing no_smoothing{.width = 5, .interval = 0};

/// One truth step from scratch: explicit Jacobian loop plus a dense LU solve
/// of the independently assembled Helmholtz matrix.
std::pair<std::vector<double>, std::vector<double>> oracle_step(const QGState& s, const PhysParams& p) {
    const int n = s.grid().n();
    const double h = 1.0 / n;
    const int m = n * n;
    Matrix a = Matrix::Zero(m, m);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            const int r = k * n + l;
            a(r, r) = -(4.0 + h * h * p.kd2 / 2.0);
            a(r, test::mod(k + 1, n) * n + l) += 1.0;
            a(r, test::mod(k - 1, n) * n + l) += 1.0;
            a(r, k * n + test::mod(l + 1, n)) += 1.0;
            a(r, k * n + test::mod(l - 1, n)) += 1.0;
        }
    const Eigen::PartialPivLU<Matrix> lu(a);
    auto layer = [&](const ScalarField& psi, const ScalarField& q, const ScalarField& partner) {
        const auto j = test::oracle_jacobian(psi, q);
        Vector rhs(m);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
                const int r = k * n + l;
                const double q_next = q(k, l) - p.dt * j[static_cast<std::size_t>(r)];
                rhs[r] = h * h * (q_next - p.beta * l * h - p.kd2 / 2.0 * partner(k, l));
            }
        const Vector x = lu.solve(rhs);
        return std::vector<double>(x.begin(), x.end());
    };
    return {layer(s.psi1, s.q1, s.psi2), layer(s.psi2, s.q2, s.psi1)};
}

}  // namespace

TEST(InitState, GaussianPeakAtCentre) {
    const auto s = init_state(GridSpec(10), PhysParams{}, InitialCondition::gaussian);
    EXPECT_DOUBLE_EQ(s.psi1(5, 5), 1.0);
    EXPECT_DOUBLE_EQ(s.psi2(5, 5), 1.0);
    EXPECT_EQ(s.step, 0);
}

TEST(InitState, SinusoidalAtOrigin) {
    const auto s = init_state(GridSpec(10), PhysParams{}, InitialCondition::sinusoidal);
    EXPECT_DOUBLE_EQ(s.psi1(0, 0), 0.6);
    EXPECT_DOUBLE_EQ(s.psi2(0, 0), 0.7);
}

TEST(InitState, DeterministicAndDiagnosed) {
    const PhysParams p;
    const auto a = init_state(GridSpec(12), p, InitialCondition::sinusoidal);
    const auto b = init_state(GridSpec(12), p, InitialCondition::sinusoidal);
    EXPECT_EQ(a.psi1.values(), b.psi1.values());
    EXPECT_EQ(a.q2.values(), b.q2.values());
    const auto [q1, q2] = diagnose_q(a.psi1, a.psi2, p);
    EXPECT_EQ(a.q1.values(), q1.values());
    EXPECT_EQ(a.q2.values(), q2.values());
}

TEST(InitState, UnknownTagIsRejected) {
    EXPECT_THROW(parse_initial_condition("vortex"), ConfigError);
    EXPECT_EQ(parse_initial_condition("gaussian"), InitialCondition::gaussian);
}

TEST(PhysParams, Validation) {
    EXPECT_THROW((PhysParams{.kd2 = 0.0}.validate()), ConfigError);
    EXPECT_THROW((PhysParams{.dt = -1.0}.validate()), ConfigError);
    EXPECT_THROW((PhysParams{.n_steps = -1}.validate()), ConfigError);
}

TEST(DiagnoseQ, ZeroAndConstantStreamfunctionsGiveBetaY) {
    GridSpec g(8);
    const PhysParams p;
    for (double c : {0.0, 1.3}) {
        const auto psi = ScalarField::constant(g, c);
        const auto [q1, q2] = diagnose_q(psi, psi, p);
        const Vector by = p.beta * y_coordinate(g).values();
        EXPECT_LT((q1.values() - by).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((q2.values() - by).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(DiagnoseQ, PlaneWave) {
    GridSpec g(16);
    const double h = g.h();
    const PhysParams p;
    const auto psi1 = ScalarField::from_function(g, [](double x, double) { return std::cos(2 * pi * x); });
    const auto [q1, q2] = diagnose_q(psi1, ScalarField(g), p);
    for (int k = 0; k < 16; ++k)
        for (int l = 0; l < 16; ++l) {
            const double expected =
                (2 * std::cos(2 * pi * h) - 2) / (h * h) * psi1(k, l) + p.beta * l * h - p.kd2 / 2 * psi1(k, l);
            EXPECT_NEAR(q1(k, l), expected, 1e-9);
            EXPECT_NEAR(q2(k, l), p.beta * l * h + p.kd2 / 2 * psi1(k, l), 1e-12);
        }
}

TEST(StepQ, ConstantStreamfunctionLeavesQ) {
    GridSpec g(8);
    QGState s{ScalarField::constant(g, 2.0), ScalarField::constant(g, -1.0), test::random_field(g, 1),
              test::random_field(g, 2), 0};
    const auto [q1, q2] = step_q(s, PhysParams{});
    EXPECT_EQ(q1.values(), s.q1.values());
    EXPECT_EQ(q2.values(), s.q2.values());
}

TEST(StepQ, QEqualPsiIsStationary) {
    GridSpec g(8);
    const auto f = test::random_field(g, 4, -0.01, 0.01);
    QGState s{f, f, f, f, 0};
    const auto [q1, q2] = step_q(s, PhysParams{});
    EXPECT_EQ(q1.values(), f.values());
    EXPECT_EQ(q2.values(), f.values());
}

TEST(StepQ, MatchesHandLoopFromGaussian) {
    const PhysParams p;
    const auto s = init_state(GridSpec(10), p, InitialCondition::gaussian);
    const auto [q1, q2] = step_q(s, p);
    const auto j1 = test::oracle_jacobian(s.psi1, s.q1), j2 = test::oracle_jacobian(s.psi2, s.q2);
    for (Eigen::Index i = 0; i < q1.values().size(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        EXPECT_NEAR(q1.values()[i], s.q1.values()[i] - p.dt * j1[u], 1e-13 * (1 + std::abs(q1.values()[i])));
        EXPECT_NEAR(q2.values()[i], s.q2.values()[i] - p.dt * j2[u], 1e-13 * (1 + std::abs(q2.values()[i])));
    }
}

TEST(StepQ, CflViolationNamesQuantities) {
    GridSpec g(10);
    const auto big = ScalarField::from_function(g, [](double x, double) { return 1e4 * std::sin(2 * pi * x); });
    QGState s{big, big, big, big, 7};
    try {
        step_q(s, PhysParams{});
        FAIL() << "expected a CFL error";
    } catch (const DivergenceError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("U_max="), std::string::npos);
        EXPECT_NE(msg.find("dt="), std::string::npos);
        EXPECT_NE(msg.find("h="), std::string::npos);
        EXPECT_EQ(e.step(), 7);
    }
    EXPECT_NO_THROW(step_q(s, PhysParams{}, false));
}

TEST(StepPsi, ZeroInputsGiveZero) {
    GridSpec g(6);
    const auto op = assemble_helmholtz(g, 10.0);
    QGState s{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g), 0};
    const auto [p1, p2] = step_psi(s, {ScalarField(g), ScalarField(g)}, op, PhysParams{.beta = 0.0});
    EXPECT_LT(p1.values().cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(p2.values().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(StepPsi, InversionUndoesDiagnosisWithLaggedPartner) {
    GridSpec g(10);
    const PhysParams p;
    const auto op = assemble_helmholtz(g, p.kd2);
    const auto s = init_state(g, p, InitialCondition::sinusoidal);
    const auto [p1, p2] = step_psi(s, {s.q1, s.q2}, op, p);
    EXPECT_LT((p1 - s.psi1).values().cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((p2 - s.psi2).values().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(StepPsi, NonFiniteVorticityIsDivergence) {
    GridSpec g(6);
    const auto op = assemble_helmholtz(g, 10.0);
    QGState s{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g), 3};
    ScalarField bad(g);
    bad(1, 1) = std::nan("");
    EXPECT_THROW(step_psi(s, {bad, ScalarField(g)}, op, PhysParams{}), DivergenceError);
}

TEST(TruthSolver, FullStepMatchesDenseOracle) {
    const PhysParams p;
    GridSpec g(10);
    TruthSolver solver(g, p, InitialCondition::sinusoidal, no_smoothing);
    const QGState start = solver.state();
    const auto [o1, o2] = oracle_step(start, p);
    const QGState& next = solver.step();
    EXPECT_EQ(next.step, 1);
    EXPECT_LT(test::max_abs_diff(next.psi1.values(), o1), 1e-12);
    EXPECT_LT(test::max_abs_diff(next.psi2.values(), o2), 1e-12);
}

TEST(RunTruth, ZeroStepsReturnsInitialStateOnly) {
    const auto states = run_truth(GridSpec(8), PhysParams{.n_steps = 0}, InitialCondition::gaussian, 1, no_smoothing);
    ASSERT_EQ(states.size(), 1u);
    EXPECT_EQ(states[0].step, 0);
    EXPECT_EQ(states[0].psi1.values(), init_state(GridSpec(8), PhysParams{}, InitialCondition::gaussian).psi1.values());
}

TEST(RunTruth, StrideKeepsEndpoints) {
    const auto states = run_truth(GridSpec(8), PhysParams{.n_steps = 25}, InitialCondition::gaussian, 10);
    ASSERT_EQ(states.size(), 4u);
    EXPECT_EQ(states[0].step, 0);
    EXPECT_EQ(states[2].step, 20);
    EXPECT_EQ(states[3].step, 25);
    EXPECT_THROW(run_truth(GridSpec(8), PhysParams{.n_steps = 5}, InitialCondition::gaussian, 0), ConfigError);
}

TEST(RunTruth, GaussianFiveHundredStepsUnsmoothedStaysFinite) {
    const auto states = run_truth(GridSpec(10), PhysParams{.n_steps = 500}, InitialCondition::gaussian, 500, no_smoothing);
    EXPECT_TRUE(states.back().all_finite());
    EXPECT_EQ(states.back().step, 500);
}

TEST(RunTruth, Deterministic) {
    const PhysParams p{.n_steps = 300};
    const auto a = run_truth(GridSpec(12), p, InitialCondition::sinusoidal, 300);
    const auto b = run_truth(GridSpec(12), p, InitialCondition::sinusoidal, 300);
    EXPECT_EQ(a.back().psi1.values(), b.back().psi1.values());
    EXPECT_EQ(a.back().q2.values(), b.back().q2.values());
}

TEST(RunTruth, NoFlowFixedPoint) {
    GridSpec g(8);
    const PhysParams p{.n_steps = 200};
    QGState zero{ScalarField(g), ScalarField(g), p.beta * y_coordinate(g), p.beta * y_coordinate(g), 0};
    TruthSolver solver(p, assemble_helmholtz(g, p.kd2), zero);
    for (int i = 0; i < 200; ++i) solver.step();
    EXPECT_LT(solver.state().psi1.values().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(solver.state().psi2.values().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((solver.state().q1 - p.beta * y_coordinate(g)).values().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Advection, MeanVorticityIsConserved) {
    for (int n : {8, 16, 24}) {
        GridSpec g(n);
        const auto psi = test::smooth_random_field(g, 10u + n), q = test::smooth_random_field(g, 20u + n);
        EXPECT_LE(std::abs(jacobian(psi, q).values().sum()), 1e-10 * n * n) << "n=" << n;
    }
}

TEST(RunTruth, FiniteAcrossDeskScaleGrid) {
    for (int n : {10, 30})
        for (auto ic : {InitialCondition::sinusoidal, InitialCondition::gaussian}) {
            bool finite = true;
            run_truth(GridSpec(n), PhysParams{.n_steps = 5000}, ic,
                      [&](const QGState& s) { finite = finite && s.all_finite(); });
            EXPECT_TRUE(finite) << "n=" << n << " ic=" << to_string(ic);
        }
}

TEST(RunTruth, BenchmarkScaleCompletes) {
    const auto states = run_truth(GridSpec(50), PhysParams{.n_steps = 20000}, InitialCondition::sinusoidal, 20000);
    EXPECT_EQ(states.back().step, 20000);
    EXPECT_TRUE(states.back().all_finite());
}

TEST(RunTruth, UnsmoothedBenchmarkScaleDiverges) {
    EXPECT_THROW(run_truth(GridSpec(50), PhysParams{.n_steps = 20000}, InitialCondition::sinusoidal,
                           [](const QGState&) {}, no_smoothing),
                 DivergenceError);
}

TEST(BoxSmooth, WidthOneIsIdentityAndMassIsKept) {
    GridSpec g(10);
    const auto f = test::random_field(g, 31);
    EXPECT_EQ(box_smooth(f, 1).values(), f.values());
    EXPECT_NEAR(box_smooth(f, 5).values().sum(), f.values().sum(), 1e-12);
    EXPECT_THROW(box_smooth(f, 4), ConfigError);
}

TEST(BoxSmooth, AnnihilatesWaveOfKernelWavelength) {
    GridSpec g(10);
    const auto f = ScalarField::from_function(g, [](double x, double y) { return std::cos(4 * pi * x) + std::sin(4 * pi * y); });
    EXPECT_LT(box_smooth(f, 5).values().cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BoxSmooth, MatchesWindowAverageLoop) {
    GridSpec g(7);
    const auto f = test::random_field(g, 41);
    const auto s = box_smooth(f, 3);
    const auto p = test::plain(f);
    for (int k = 0; k < 7; ++k)
        for (int l = 0; l < 7; ++l) {
            double sum = 0;
            for (int a = -1; a <= 1; ++a)
                for (int b = -1; b <= 1; ++b) sum += p(k + a, l + b);
            EXPECT_NEAR(s(k, l), sum / 9, 1e-15);
        }
}

TEST(Smoothing, AutoIntervalScalesWithGridSquared) {
    EXPECT_EQ(Smoothing::auto_interval(50), 1000);
    EXPECT_EQ(Smoothing::auto_interval(30), 2778);
    EXPECT_EQ(Smoothing::auto_interval(10), 25000);
    EXPECT_EQ(Smoothing{}.interval_for(50), 1000);
    EXPECT_EQ((Smoothing{.width = 5, .interval = 7}).interval_for(50), 7);
    EXPECT_THROW((Smoothing{.width = 5, .interval = -2}.validate()), ConfigError);
    EXPECT_THROW((Smoothing{.width = 2, .interval = 10}.validate()), ConfigError);
}

TEST(Smoothing, AppliedOnScheduleOnly) {
    GridSpec g(10);
    const PhysParams p;
    const Smoothing every3{.width = 3, .interval = 3};
    TruthSolver smoothed(g, p, InitialCondition::gaussian, every3);
    TruthSolver plain(g, p, InitialCondition::gaussian, no_smoothing);
    QGState expect = plain.state();
    smooth_state(expect, p, 3);
    EXPECT_EQ(smoothed.state().psi1.values(), expect.psi1.values());
    TruthSolver manual(p, assemble_helmholtz(g, p.kd2), expect, no_smoothing);
    for (int i = 1; i <= 3; ++i) {
        smoothed.step();
        manual.step();
        if (i < 3) {
            EXPECT_EQ(smoothed.state().psi1.values(), manual.state().psi1.values());
        }
    }
    QGState at3 = manual.state();
    smooth_state(at3, p, 3);
    EXPECT_EQ(smoothed.state().psi2.values(), at3.psi2.values());
    EXPECT_EQ(smoothed.state().q1.values(), at3.q1.values());
}
