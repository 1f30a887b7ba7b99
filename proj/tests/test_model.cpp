#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cgdyn/model.hpp"

using namespace cgdyn;

TEST(DoubleWell, KnownValues) {
    const auto m = builtin_doublewell(0.01);
    EXPECT_DOUBLE_EQ(m.potential({1.0, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(m.potential({0.0, 1.0}), 1.0);
    const Vector g = m.gradient({1.0, 0.0});
    EXPECT_DOUBLE_EQ(g[0], 0.0);
    EXPECT_DOUBLE_EQ(g[1], 0.0);
    EXPECT_EQ(m.dimension, 2u);
    EXPECT_DOUBLE_EQ(m.params.at("epsilon"), 0.01);
}

TEST(DoubleWell, RejectsNonPositiveEpsilon) {
    EXPECT_THROW(builtin_doublewell(0.0), Error);
    try {
        builtin_doublewell(-1.0);
    } catch (const Error& e) {
        EXPECT_EQ(e.exit_code(), 2);
    }
}

TEST(DoubleWell, DerivativesMatchFiniteDifferences) {
    const auto m = builtin_doublewell(0.01);
    EXPECT_LT(max_gradient_fd_error(m, 500, 3), 1e-6);
    EXPECT_LT(max_hessian_fd_error(m, 500, 3), 1e-6);
}

TEST(ReactionCoordinates, Xi2ValueAndGradient) {
    const auto rc = builtin_xi2();
    EXPECT_DOUBLE_EQ(rc.value({1.0, 0.0}), 1.0);
    const Vector g = rc.gradient({1.0, 0.0});
    EXPECT_DOUBLE_EQ(g[0], 1.0);
    EXPECT_DOUBLE_EQ(g[1], -2.0);
}

TEST(ReactionCoordinates, Xi2OrthogonalToConstraintEverywhere) {
    const auto rc = builtin_xi2();
    const auto* q = rc.constraint_field();
    ASSERT_NE(q, nullptr);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 1000; ++k) {
        const Configuration x{u(rng), u(rng)};
        EXPECT_NEAR(dot(rc.gradient(x), q->gradient(x)), 0.0, 1e-12 * (1.0 + norm(rc.gradient(x))));
    }
}

TEST(ReactionCoordinates, Xi1HasUnitGradient) {
    const auto rc = builtin_xi1();
    for (double x : {-2.0, 0.3, 5.0}) EXPECT_DOUBLE_EQ(norm(rc.gradient({x, 0.7})), 1.0);
}

TEST(ReactionCoordinates, ChartsStayOnTheirLevelSet) {
    for (const auto& rc : {builtin_xi1(), builtin_xi2()}) {
        for (double z : {-1.5, 0.0, 0.13, 2.0})
            for (double s : {-1.0, 0.0, 0.4}) EXPECT_NEAR(rc.value(rc.levelset_param(z, s)), z, 1e-12) << rc.name;
    }
}

TEST(ReactionCoordinates, Xi2TangentMatchesDifferences) {
    const auto rc = builtin_xi2();
    auto fd = rc;
    fd.levelset_tangent = nullptr;
    for (double z : {-1.0, 0.5})
        for (double s : {-0.5, 0.2}) {
            const Vector a = rc.tangent_at(z, s), b = fd.tangent_at(z, s);
            EXPECT_NEAR(a[0], b[0], 1e-6);
            EXPECT_NEAR(a[1], b[1], 1e-6);
        }
}

TEST(ReactionCoordinates, HessiansMatchFiniteDifferences) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (const auto& rc : {builtin_xi1(), builtin_xi2()}) {
        for (int k = 0; k < 50; ++k) {
            const Configuration x{u(rng), u(rng)};
            const SymMatrix a = rc.hessian(x), f = fd_hessian(rc.gradient, x, 1e-5);
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(a(i, j), f(i, j), 1e-5 * (1.0 + std::abs(a(i, j))));
        }
    }
}

TEST(ReactionCoordinates, Xi2GradientBoundsHoldOnBox) {
    const auto rc = builtin_xi2();
    const auto m = builtin_doublewell(0.01);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 2000; ++k) {
        const double g = norm(rc.gradient(sample_in_box(m, rng)));
        EXPECT_GE(g, rc.grad_min);
        EXPECT_LE(g, rc.grad_max);
    }
}

TEST(ThreeAtom, EquilibriumConfiguration) {
    const double th0 = 1.187;
    const auto t = builtin_threeatom(1e-3, 1.0, th0, 208.0);
    const Configuration x{1.0, std::cos(th0), std::sin(th0)};
    EXPECT_NEAR(t.angle.value(x), th0, 1e-14);
    EXPECT_NEAR(t.model.potential(x), 0.0, 1e-14);
    EXPECT_EQ(t.angle.constraints.size(), 2u);
}

TEST(ThreeAtom, AngleIsOrthogonalToBothBonds) {
    const auto t = builtin_threeatom(1e-3, 1.0, 1.187, 208.0);
    const auto m = t.model;
    std::mt19937_64 rng(17);
    for (int k = 0; k < 100; ++k) {
        const Configuration x = sample_in_box(m, rng);
        for (const auto& q : t.angle.constraints) EXPECT_NEAR(dot(t.angle.gradient(x), q.gradient(x)), 0.0, 1e-8);
    }
}

TEST(ThreeAtom, DerivativesMatchFiniteDifferences) {
    const auto t = builtin_threeatom(1e-3, 1.0, 1.187, 208.0);
    EXPECT_LT(max_gradient_fd_error(t.model, 300, 4), 1e-5);
    EXPECT_LT(max_hessian_fd_error(t.model, 300, 4), 1e-4);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 100; ++k) {
        const Configuration x = sample_in_box(t.model, rng);
        const Vector g = t.angle.gradient(x), f = fd_gradient(t.angle.value, x, 1e-6);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g[i], f[i], 1e-6);
        const SymMatrix h = t.angle.hessian(x), hf = fd_hessian(t.angle.gradient, x, 1e-5);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(h(i, j), hf(i, j), 1e-4 * (1.0 + std::abs(h(i, j))));
    }
}

TEST(ThreeAtom, DegenerateGeometryIsANumericError) {
    const auto t = builtin_threeatom(1e-3, 1.0, 1.187, 208.0);
    try {
        t.angle.value({0.0, 0.5, 0.5});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
}

TEST(OmegaTestCase, LimitDrift) {
    EXPECT_DOUBLE_EQ(OmegaTestCase::limit_drift(0.0, 1.0), -0.5);
    // Omega' vanishes at pi/2, leaving -dV0/dx.
    const double a = M_PI / 2;
    EXPECT_NEAR(OmegaTestCase::limit_drift(a, 2.0), -4.0 * a * (a * a - 1.0), 1e-12);
}

TEST(OmegaTestCase, DerivativesMatchFiniteDifferences) {
    const auto t = builtin_omega_testcase(1e-3);
    EXPECT_LT(max_gradient_fd_error(t.model, 300, 8), 1e-5);
    EXPECT_LT(max_hessian_fd_error(t.model, 300, 8), 1e-4);
}

TEST(ModelSpec, MissingHessianFallsBackToDifferences) {
    auto m = builtin_doublewell(0.1);
    const auto exact = m.hessian({0.3, 0.2});
    m.hessian = nullptr;
    const auto approx = m.hessian_at({0.3, 0.2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(approx(i, j), exact(i, j), 1e-6 * (1.0 + std::abs(exact(i, j))));
}

TEST(Configuration, BasicOperations) {
    Configuration a{1.0, 2.0, 2.0};
    EXPECT_EQ(a.size(), 3u);
    EXPECT_DOUBLE_EQ(norm(a), 3.0);
    const Vector b = axpy(a, 2.0, Vector{1.0, 0.0, -1.0});
    EXPECT_DOUBLE_EQ(b[0], 3.0);
    EXPECT_DOUBLE_EQ(b[2], 0.0);
    EXPECT_TRUE(a.all_finite());
    a[1] = std::nan("");
    EXPECT_FALSE(a.all_finite());
}
