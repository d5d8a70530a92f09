#include "fpbounds/mollifier.hpp"
#include "fpbounds/oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fpb;

namespace {

std::vector<double> gaussian(const SpatialGrid& g, double var) {
    const auto st = oracle::GaussianState::isotropic(g.dim, var);
    std::vector<double> v(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) v[c] = st.density(g.point(c));
    return v;
}

}  // namespace

TEST(Mollify, ConstantInterior) {
    const auto g = SpatialGrid::symmetric(1, 5.0, 500);
    std::vector<double> v(g.size(), 2.0);
    const auto m = mollify(g, v, {0.1, 8.0});
    for (std::size_t c = 100; c < 400; ++c) EXPECT_NEAR(m.values[c], 2.0, 1e-14);
    EXPECT_GT(m.leakage, 0.0);
}

TEST(Mollify, SingleCell) {
    const auto g = SpatialGrid::symmetric(1, 5.0, 1000);
    std::vector<double> v(g.size(), 0.0);
    const std::size_t c0 = 500;
    const double m = 3.0;
    v[c0] = m / g.cell_volume();
    const MollifierSpec spec{0.05, 8.0};
    const auto out = mollify(g, v, spec);
    for (std::size_t c = 480; c < 520; ++c) {
        const double z = (g.point(c)[0] - g.point(c0)[0]) / spec.epsilon;
        const double w = std::exp(-0.5 * z * z) / (spec.epsilon * std::sqrt(2.0 * std::numbers::pi));
        EXPECT_NEAR(out.values[c], m * w, 1e-6 * m * w + 1e-12);
    }
}

TEST(Mollify, GaussianVarianceAdds) {
    const auto g = SpatialGrid::symmetric(1, 10.0, 2000);
    const auto v = gaussian(g, 1.0);
    const auto out = mollify(g, v, {0.3, 8.0});
    const auto want = gaussian(g, 1.0 + 0.09);
    for (std::size_t c = 0; c < g.size(); c += 50) EXPECT_NEAR(out.values[c], want[c], 1e-8);
}

TEST(Mollify, Semigroup) {
    const auto g = SpatialGrid::symmetric(1, 10.0, 2000);
    const auto v = gaussian(g, 0.5);
    const auto twice = mollify(g, mollify(g, v, {0.2, 8.0}).values, {0.3, 8.0});
    const auto once = mollify(g, v, {std::sqrt(0.04 + 0.09), 8.0});
    for (std::size_t c = 0; c < g.size(); c += 25) EXPECT_NEAR(twice.values[c], once.values[c], 1e-8);
}

TEST(Mollify, TranslationCommutes) {
    const auto g = SpatialGrid::symmetric(2, 4.0, 64);
    std::vector<double> a(g.size(), 0.0), b(g.size(), 0.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U;
    for (int i = 24; i < 40; ++i)
        for (int j = 24; j < 40; ++j) {
            const double v = U(rng);
            a[g.ravel({i, j, 0})] = v;
            b[g.ravel({i + 1, j, 0})] = v;
        }
    const MollifierSpec spec{0.3, 8.0};
    const auto ma = mollify(g, a, spec), mb = mollify(g, b, spec);
    for (int i = 12; i < 50; ++i)
        for (int j = 12; j < 50; ++j) EXPECT_NEAR(ma.values[g.ravel({i, j, 0})], mb.values[g.ravel({i + 1, j, 0})], 1e-12);
}

TEST(Mollify, RefusesSubCellScale) {
    const auto g = SpatialGrid::symmetric(1, 1.0, 10);
    std::vector<double> v(10, 1.0);
    EXPECT_THROW(mollify(g, v, {0.3, 8.0}), RefusedError);
}

TEST(FEpsilon, ZeroDensity) {
    const auto g = SpatialGrid::symmetric(1, 4.0, 80);  // centers at +-2.05, +-1.95, ...
    std::vector<double> zero(g.size(), 0.0);
    const auto f = f_epsilon(g, zero, {0.5, 8.0});
    for (std::size_t c = 0; c < g.size(); ++c) {
        const double r = std::max(1.0, std::abs(g.point(c)[0]));
        EXPECT_NEAR(f[c], 0.5 / (r * r), 1e-15);
        if (std::abs(g.point(c)[0]) < 1.0) {
            EXPECT_DOUBLE_EQ(f[c], 0.5);
        }
    }
    // at |x| = 2 the tail term is 1/8
    const auto g2 = SpatialGrid(1, {1.75, 0, 0}, {2.25, 0, 0}, {5, 1, 1});
    EXPECT_NEAR(f_epsilon(g2, std::vector<double>(5, 0.0), {0.5, 8.0})[2], 0.125, 1e-15);
}

TEST(FEpsilon, PositiveAndAboveMollified) {
    const auto g = SpatialGrid::symmetric(2, 3.0, 48);
    const auto v = gaussian(g, 0.6);
    const MollifierSpec spec{0.3, 8.0};
    const auto f = f_epsilon(g, v, spec);
    const auto m = mollify(g, v, spec);
    const double floor = spec.epsilon * std::pow(std::max(1.0, g.corner_radius()), -3.0);
    for (std::size_t c = 0; c < g.size(); ++c) {
        EXPECT_GE(f[c], m.values[c]);
        EXPECT_GE(f[c], floor);
    }
}

TEST(ConvolutionInequality, EqualityForConstantPsi) {
    const auto g = SpatialGrid::symmetric(1, 2.0, 32);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U;
    std::vector<double> f1(32), f2(32), psi(32, 1.0);
    for (auto& v : f1) v = U(rng);
    for (auto& v : f2) v = U(rng);
    const auto gap = convolution_inequality_gap(g, f1, f2, psi);
    EXPECT_NEAR(gap.lhs, gap.rhs, 1e-12 * gap.rhs);
}

TEST(ConvolutionInequality, DiracSecondFactor) {
    const auto g = SpatialGrid::symmetric(1, 2.0, 64);
    std::vector<double> f1(64), f2(64, 0.0), psi(64);
    for (std::size_t c = 0; c < 64; ++c) {
        const double x = g.point(c)[0];
        f1[c] = std::exp(-x * x);
        psi[c] = std::sin(2.0 * x) + 0.3;
    }
    f2[20] = 1.0 / g.cell_volume();
    const auto gap = convolution_inequality_gap(g, f1, f2, psi);
    double want = 0.0;
    for (std::size_t c = 0; c < 64; ++c) want += psi[c] * psi[c] * f1[c];
    EXPECT_NEAR(gap.lhs, want * g.cell_volume(), 1e-12);
    EXPECT_LE(gap.lhs, gap.rhs * (1.0 + 1e-12));
}

TEST(ConvolutionInequality, RandomTriplesNeverViolate) {
    const auto g = SpatialGrid::symmetric(1, 2.0, 48);
    std::uniform_real_distribution<double> U;
    std::normal_distribution<double> N;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<double> f1(48), f2(48), psi(48);
        for (std::size_t c = 0; c < 48; ++c) {
            f1[c] = U(rng) < 0.2 ? 0.0 : U(rng);
            f2[c] = U(rng) < 0.2 ? 0.0 : U(rng);
            psi[c] = N(rng);
        }
        const auto gap = convolution_inequality_gap(g, f1, f2, psi);
        EXPECT_GE(gap.gap(), -1e-10 * gap.rhs) << "seed " << seed;
    }
}
