#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cgdyn/parallel.hpp"
#include "cgdyn/quadrature.hpp"
#include "cgdyn/rng.hpp"
#include "cgdyn/stats.hpp"

using namespace cgdyn;

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
    using C = Philox4x32::Counter;
    const C zero = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(zero, (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    const C ones = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(ones, (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    const C pi = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(pi, (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NoiseStream, SameSeedAndStreamReproduce) {
    NoiseStream a(42, 7), b(42, 7);
    for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(NoiseStream, CounterResumesTheSequence) {
    NoiseStream a(3, 1);
    for (int i = 0; i < 100; ++i) a.uniform();  // two words per block: ends on a block boundary
    NoiseStream b(3, 1, a.counter());
    EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(NoiseStream, DistinctStreamsAreUncorrelated) {
    NoiseStream a(42, 7), b(42, 8), c(43, 7);
    const int n = 200000;
    double sab = 0, sac = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.normal(), y = b.normal(), z = c.normal();
        sab += x * y;
        sac += x * z;
    }
    // Correlations of independent normals have sd 1/sqrt(n).
    EXPECT_LT(std::abs(sab / n), 5.0 / std::sqrt(n));
    EXPECT_LT(std::abs(sac / n), 5.0 / std::sqrt(n));
}

TEST(NoiseStream, NormalMoments) {
    NoiseStream s(1, 0);
    const int n = 2'000'000;
    double m1 = 0, m2 = 0, m4 = 0, tail = 0;
    for (int i = 0; i < n; ++i) {
        const double x = s.normal();
        m1 += x;
        m2 += x * x;
        m4 += x * x * x * x;
        if (std::abs(x) > 3.5) tail += 1;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    tail /= n;
    EXPECT_NEAR(m1, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(m2, 1.0, 5.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(m4, 3.0, 5.0 * std::sqrt(96.0 / n));
    const double p = std::erfc(3.5 / std::sqrt(2.0));
    EXPECT_NEAR(tail, p, 5.0 * std::sqrt(p / n));
}

TEST(NoiseStream, UniformIsInOpenUnitInterval) {
    NoiseStream s(9, 9);
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Quadrature, PolynomialsAreExact) {
    const std::vector<double> bp{-1.0, 2.0};
    const auto r = quad::integrate<2>([](double x) { return quad::Values<2>{x * x * x * x, 3.0 * x * x - x}; }, bp,
                                      1e-14, 0.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value[0], (32.0 + 1.0) / 5.0, 1e-13);
    EXPECT_NEAR(r.value[1], 9.0 - 1.5, 1e-13);
}

TEST(Quadrature, GaussianWithBreakpoints) {
    const std::vector<double> bp{-12.0, 0.0, 12.0};
    const auto r = quad::integrate<1>([](double x) { return quad::Values<1>{std::exp(-0.5 * x * x)}; }, bp, 1e-12, 0.0);
    EXPECT_NEAR(r.value[0], std::sqrt(2.0 * M_PI), 1e-11);
    EXPECT_LT(r.error[0], 1e-10);
}

TEST(Quadrature, SharpPeakNeedsAdaptivity) {
    const double a = 1e-3;
    const std::vector<double> bp{-1.0, 1.0};
    const auto r = quad::integrate<1>([&](double x) { return quad::Values<1>{a / (x * x + a * a)}; }, bp, 1e-10, 0.0);
    EXPECT_NEAR(r.value[0], 2.0 * std::atan(1.0 / a), 1e-8);
    EXPECT_GT(r.evaluations, 15u);
}

TEST(Parallel, EveryIndexRunsOnce) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, RethrowsLowestFailingIndex) {
    try {
        parallel_for(100, 3, [](std::size_t i) {
            if (i == 40 || i == 70) throw std::runtime_error(std::to_string(i));
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "40");
    }
}

TEST(Stats, MeanAndConfidenceInterval) {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto c = stats::mean_ci(v);
    EXPECT_DOUBLE_EQ(c.mean, 2.5);
    EXPECT_NEAR(c.sd, std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_NEAR(c.half_ci, 1.96 * c.sd / 2.0, 1e-15);
}

TEST(Stats, HistogramClampsToEndBins) {
    stats::Histogram h(0.0, 1.0, 4);
    for (double x : {-5.0, 0.1, 0.3, 0.6, 0.99, 7.0}) h.add(x);
    EXPECT_EQ(h.counts(), (std::vector<double>{2, 1, 1, 2}));
    const auto p = h.probabilities();
    EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-15);
}

TEST(Stats, DistancesAndSlopes) {
    const std::vector<double> a{1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(stats::tv_between_samples(a, a, 10), 0.0);
    const std::vector<double> x{1, 10, 100}, y{3, 30, 300};
    EXPECT_NEAR(stats::loglog_slope(x, y), 1.0, 1e-12);
    const std::vector<double> p{0.5, 0.5, 0}, q{0, 0.5, 0.5};
    EXPECT_DOUBLE_EQ(stats::l1_distance(p, q), 1.0);
}
