#include "fpbounds/lyapunov.hpp"
#include "fpbounds/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace fpb;

namespace {

const Field& ou_field() {
    static const Field f = oracle::sample(SpaceTimeGrid(SpatialGrid::symmetric(1, 12.0, 1024), 2e-3, 500),
                                          [](double t) { return oracle::ou_solution(0.0, 1.0, t); });
    return f;
}

const Field& heat_field() {
    static const Field f = oracle::sample(SpaceTimeGrid(SpatialGrid::symmetric(1, 10.0, 1024), 1e-3, 1000),
                                          [](double t) { return oracle::heat_solution(1.0, t); });
    return f;
}

}  // namespace

TEST(Potentials, DerivativesMatchFiniteDifferences) {
    const std::vector<Potential> all{potentials::log_sq(), potentials::log_sq_squared(),
                                     potentials::exp_power(0.7, 1.5), potentials::square_norm()};
    const double h = 1e-5;
    for (const auto& V : all) {
        for (const Vec& x : {Vec(Vec::Constant(2, 0.3)), Vec(Vec::Constant(2, 1.7)), Vec(Vec::Constant(2, -2.2))}) {
            const Vec g = V.grad(x);
            const Mat H = V.hess(x);
            for (int a = 0; a < 2; ++a) {
                Vec xp = x, xm = x;
                xp[a] += h;
                xm[a] -= h;
                EXPECT_NEAR(g[a], (V(xp) - V(xm)) / (2 * h), 1e-5 * std::max(1.0, std::abs(g[a]))) << V.family;
                const Vec dg = (V.grad(xp) - V.grad(xm)) / (2 * h);
                for (int b = 0; b < 2; ++b)
                    EXPECT_NEAR(H(b, a), dg[b], 1e-5 * std::max(1.0, std::abs(H(b, a)))) << V.family;
            }
        }
    }
}

TEST(Potentials, ExpPowerIsC2AcrossUnitSphere) {
    const auto V = potentials::exp_power(0.4, 3.0);
    const Vec in = Vec::Constant(1, 1.0 - 1e-9), out = Vec::Constant(1, 1.0 + 1e-9);
    EXPECT_NEAR(V(in), std::exp(0.4), 1e-8);
    EXPECT_NEAR(V(in), V(out), 1e-8);
    EXPECT_NEAR(V.grad(in)[0], V.grad(out)[0], 1e-7);
    EXPECT_NEAR(V.hess(in)(0, 0), V.hess(out)(0, 0), 1e-6);
    EXPECT_THROW(potentials::exp_power(1.0, 0.0), std::invalid_argument);
}

TEST(Lyapunov, LogSquareUnderOu) {
    const auto rep = lyapunov_check(potentials::log_sq(), coeffs::ornstein_uhlenbeck(1), 0.0, 2.0 + 1e-9,
                                    Box::symmetric(1, 10.0));
    EXPECT_NEAR(rep.min_c2, 2.0, 1e-12);
    EXPECT_TRUE(rep.pass);
    EXPECT_TRUE(rep.grows);
    EXPECT_NEAR(rep.worst_point[0], 0.0, 1e-12);
    EXPECT_FALSE(lyapunov_check(potentials::log_sq(), coeffs::ornstein_uhlenbeck(1), 0.0, 1.9,
                                Box::symmetric(1, 10.0))
                     .pass);
}

TEST(Lyapunov, SquareNormUnderHeat) {
    const Vec x = Vec::Constant(1, 1.3);
    EXPECT_DOUBLE_EQ(apply_L(coeffs::constant(1, 0.5), potentials::square_norm(), 0.2, x), 1.0);
    const auto rep = lyapunov_check(potentials::square_norm(), coeffs::constant(1, 0.5), 0.0, 1.0,
                                    Box::symmetric(1, 5.0));
    EXPECT_DOUBLE_EQ(rep.min_c2, 1.0);
    EXPECT_TRUE(rep.pass);
}

TEST(Lyapunov, LinearInThePotential) {
    const auto c = coeffs::ornstein_uhlenbeck(2);
    const Box box = Box::symmetric(2, 4.0);
    const auto V = potentials::log_sq_squared();
    const auto a = lyapunov_check(V, c, 0.5, 0.0, box, 41, 2);
    const auto b = lyapunov_check(V.scaled(2.0), c, 0.5, 0.0, box, 41, 2);
    EXPECT_NEAR(b.min_c2, 2.0 * a.min_c2, 1e-12 * std::abs(a.min_c2));
    EXPECT_FALSE(lyapunov_check(potentials::constant(1.0), c, 0.0, 0.0, box, 11, 2).grows);
}

TEST(Drift, QuadraticGrowth) {
    const CoefficientField expanding(
        1, [](double, const Vec&) { return Mat::Identity(1, 1); }, [](double, const Vec& x) -> Vec { return x; });
    DriftParams p;
    p.k1 = 1.0;
    EXPECT_TRUE(drift_condition(expanding, DriftForm::quadratic, p, Box::symmetric(1, 5.0)).pass);
    p.k1 = 0.0;
    const auto bad = drift_condition(expanding, DriftForm::quadratic, p, Box::symmetric(1, 5.0));
    EXPECT_FALSE(bad.pass);
    EXPECT_NEAR(std::abs(bad.worst_point[0]), 5.0, 1e-12);
    p.k1 = 0.0;
    p.k2 = 0.0;
    EXPECT_TRUE(drift_condition(coeffs::ornstein_uhlenbeck(1), DriftForm::quad_log, p, Box::symmetric(1, 5.0)).pass);
}

TEST(Drift, PowerFormConstantIsExact) {
    DriftParams p;
    p.c1 = 0.0;
    p.c2 = 1.0;
    p.r = 2.0;
    p.K = 0.25;  // 2 r K M = 1 exactly: strict inequality fails
    p.M = 1.0;
    const auto rep = drift_condition(coeffs::ornstein_uhlenbeck(1), DriftForm::power, p, Box::symmetric(1, 5.0));
    ASSERT_TRUE(rep.constant_ok.has_value());
    EXPECT_FALSE(*rep.constant_ok);
    EXPECT_FALSE(rep.pass);
    p.K = 0.2;
    const auto ok = drift_condition(coeffs::ornstein_uhlenbeck(1), DriftForm::power, p, Box::symmetric(1, 5.0));
    EXPECT_TRUE(*ok.constant_ok);
    EXPECT_TRUE(ok.pass);
}

TEST(Pointwise, ConstantWeightIsSupNorm) {
    const auto rep = pointwise_bound_check(heat_field(), potentials::constant(1.0), coeffs::constant(1, 0.5), 1.0, 4.0);
    const auto& data = heat_field().data();
    EXPECT_DOUBLE_EQ(rep.C_emp, *std::max_element(data.begin(), data.end()));
    EXPECT_TRUE(rep.pass);
    EXPECT_THROW(pointwise_bound_check(heat_field(), potentials::constant(1.0), coeffs::constant(1, 0.5), 1.0, 3.0),
                 RefusedError);
    EXPECT_THROW(
        pointwise_bound_check(heat_field(), potentials::constant(0.5), coeffs::constant(1, 0.5), 1.0, 4.0, 0.1, 1.0),
        RefusedError);
}

TEST(Pointwise, StationaryOuExponentialWeight) {
    const auto rep = pointwise_bound_check(ou_field(), potentials::exp_power(1.0, 1.0), coeffs::ornstein_uhlenbeck(1),
                                           0.5, 4.0);
    EXPECT_TRUE(rep.pass);
    // sup_x exp(|x| - x^2/2) / sqrt(2 pi) at |x| = 1
    EXPECT_NEAR(rep.C_emp, std::exp(0.5) / std::sqrt(2.0 * std::numbers::pi), 0.02 * rep.C_emp);
}

TEST(Pointwise, MonotoneInK) {
    double prev = 0.0;
    for (double K : {0.1, 0.2, 0.3, 0.4}) {
        const auto rep = pointwise_bound_check(ou_field(), potentials::exp_power(K, 2.0), coeffs::ornstein_uhlenbeck(1),
                                               0.5, 4.0);
        EXPECT_GT(rep.C_emp, prev) << K;
        prev = rep.C_emp;
    }
}

TEST(Pointwise, HeavyWeightOnHeatIsNotFinite) {
    const auto rep = pointwise_bound_check(heat_field(), potentials::exp_power(1.0, 2.0), coeffs::constant(1, 0.5),
                                           1.0, 4.0);
    EXPECT_FALSE(rep.phi_moment.finite);
    EXPECT_FALSE(rep.pass);
}

TEST(Example31, LightAndHeavyWeights) {
    const auto c = coeffs::ornstein_uhlenbeck(1);
    const auto light = example31_audit(c, ou_field(), 0.2, 2.0, 6.0, 0.5);
    EXPECT_NEAR(light.c2, 1.0, 1e-12);
    EXPECT_TRUE(light.drift.pass);
    EXPECT_GT(light.epsilon, 0.0);
    EXPECT_TRUE(light.pass);
    ASSERT_TRUE(light.pointwise.has_value());
    EXPECT_GT(light.pointwise->C_emp, 0.0);

    const auto heavy = example31_audit(c, ou_field(), 0.3, 2.0, 6.0, 0.5);
    ASSERT_TRUE(heavy.drift.constant_ok.has_value());
    EXPECT_FALSE(*heavy.drift.constant_ok);
    EXPECT_FALSE(heavy.pass);
    EXPECT_FALSE(heavy.pointwise.has_value());
    EXPECT_THROW(example31_audit(c, ou_field(), 0.2, 2.0, 3.0, 0.5), RefusedError);
}
