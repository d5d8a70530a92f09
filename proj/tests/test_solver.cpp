#include "fpbounds/oracle.hpp"
#include "fpbounds/solver.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <sstream>

using namespace fpb;

namespace {

std::vector<double> gaussian(const SpatialGrid& g, double var, double mean = 0.0) {
    const auto st = oracle::GaussianState::isotropic(g.dim, var, mean);
    std::vector<double> v(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) v[c] = st.density(g.point(c));
    return v;
}

double l1_distance(const SpatialGrid& g, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s * g.cell_volume();
}

// Full anisotropic 2-d diffusion with a cross term and a rotating drift.
CoefficientField sheared_2d() {
    CoefficientField c(
        2,
        [](double t, const Vec& x) {
            Mat m(2, 2);
            m << 1.0 + 0.2 * std::sin(x[0]), 0.3 * std::cos(x[1]) * (1.0 + t), 0.3 * std::cos(x[1]) * (1.0 + t),
                1.2 + 0.1 * std::cos(x[0] * x[1]);
            return m;
        },
        [](double, const Vec& x) {
            Vec b(2);
            b << -x[0] + 0.5 * x[1], -x[1] - 0.5 * x[0];
            return b;
        });
    return c;
}

}  // namespace

TEST(Duality, GeneratorIsAdjointOfFluxOperator1d) {
    const auto c = coeffs::perturbed_identity(1, 1.0, 0.4, 1.5);
    const auto g = SpatialGrid::symmetric(1, 5.0, 200);
    const FluxOperator op(c, g, 0.0);
    const auto rho = gaussian(g, 1.3, 0.2);
    std::vector<double> u(g.size(), 0.0);
    const auto bump = spatial_bump(Vec::Constant(1, 0.3), 3.0);
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = bump(g.point(i));
    std::vector<double> krho(g.size());
    op.apply_diag(rho, krho);
    const auto lu = discrete_generator(c, g, 0.0, u);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        lhs += krho[i] * u[i];
        rhs += rho[i] * lu[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
}

TEST(Duality, GeneratorIsAdjointWithCrossTerms) {
    const auto c = sheared_2d();
    const auto g = SpatialGrid::symmetric(2, 4.0, 40);
    const FluxOperator op(c, g, 0.4);
    ASSERT_TRUE(op.has_cross());
    const auto rho = gaussian(g, 0.8);
    std::vector<double> u(g.size(), 0.0);
    const auto bump = spatial_bump(Vec::Zero(2), 2.5);
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = bump(g.point(i));
    std::vector<double> krho(g.size());
    op.apply_diag(rho, krho);
    op.add_cross(rho, krho);
    const auto lu = discrete_generator(c, g, 0.4, u);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        lhs += krho[i] * u[i];
        rhs += rho[i] * lu[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
}

TEST(Solver, HeatBenchmark) {
    const auto g = SpatialGrid::symmetric(1, 10.0, 2048);
    const auto grid = SpaceTimeGrid::until(g, 2.5e-4, 0.5);
    const auto t0 = std::chrono::steady_clock::now();
    const Field f = solve_fp(coeffs::constant(1, 0.5), gaussian(g, 1.0), grid);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(l1_distance(g, f.slice(grid.steps), gaussian(g, 1.5)), 1e-3);
    EXPECT_LT(secs, 30.0);
    for (int k = 0; k <= grid.steps; k += 100) EXPECT_NEAR(f.mass(k), f.mass(0), 1e-12);
}

TEST(Solver, OrnsteinUhlenbeckVariance) {
    const auto g = SpatialGrid::symmetric(1, 12.0, 1024);
    const auto grid = SpaceTimeGrid::until(g, 1e-3, 0.75);
    const Field f = solve_fp(coeffs::ornstein_uhlenbeck(1), gaussian(g, 4.0), grid);
    for (double t : {0.25, 0.5, 0.75}) {
        const auto s = f.slice_at(t);
        double m2 = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) m2 += g.point(i)[0] * g.point(i)[0] * s[i];
        EXPECT_NEAR(m2 * g.cell_volume(), 1.0 + 3.0 * std::exp(-2.0 * t), 1e-3) << "t = " << t;
    }
}

TEST(Solver, CrankNicolsonSecondOrderInTime) {
    const auto g = SpatialGrid::symmetric(1, 8.0, 256);
    const auto c = coeffs::ornstein_uhlenbeck(1);
    const auto rho0 = gaussian(g, 2.0, 0.5);
    const Field ref = solve_fp(c, rho0, SpaceTimeGrid(g, 0.5 / 1024, 1024));
    std::vector<double> err;
    for (int steps : {16, 32, 64}) {
        const Field f = solve_fp(c, rho0, SpaceTimeGrid(g, 0.5 / steps, steps));
        err.push_back(l1_distance(g, f.slice(steps), ref.slice(1024)));
    }
    EXPECT_GE(err[0] / err[1], 3.5);
    EXPECT_GE(err[1] / err[2], 3.5);
}

TEST(Solver, ExplicitRespectsCfl) {
    const auto g = SpatialGrid::symmetric(1, 5.0, 100);
    SolverConfig cfg;
    cfg.scheme = Scheme::explicit_euler;
    EXPECT_THROW(solve_fp(coeffs::constant(1, 1.0), gaussian(g, 1.0), SpaceTimeGrid(g, 0.01, 10), cfg), SolverError);
    const Field f = solve_fp(coeffs::constant(1, 1.0), gaussian(g, 1.0), SpaceTimeGrid(g, 0.002, 50), cfg);
    EXPECT_NEAR(f.mass(50), f.mass(0), 1e-12);
}

TEST(Solver, TwoDimensionalCrossTermsConserveMass) {
    const auto g = SpatialGrid::symmetric(2, 5.0, 48);
    const Field f = solve_fp(sheared_2d(), gaussian(g, 0.7), SpaceTimeGrid(g, 5e-3, 40));
    for (int k = 0; k <= 40; k += 10) EXPECT_NEAR(f.mass(k), f.mass(0), 1e-9);
    for (double v : f.data()) EXPECT_GE(v, 0.0);
}

TEST(Solver, ClippedMassAborts) {
    // Point mass with a huge step: CN rings and goes negative.
    const auto g = SpatialGrid::symmetric(1, 1.0, 64);
    std::vector<double> rho(g.size(), 0.0);
    rho[32] = 1.0 / g.cell_volume();
    EXPECT_THROW(solve_fp(coeffs::constant(1, 1.0), rho, SpaceTimeGrid(g, 0.1, 5)), SolverError);
}

TEST(Solver, RejectsBadInput) {
    const auto g = SpatialGrid::symmetric(1, 1.0, 16);
    std::vector<double> neg(16, 1.0);
    neg[3] = -1.0;
    EXPECT_THROW(solve_fp(coeffs::constant(1, 1.0), neg, SpaceTimeGrid(g, 0.1, 2)), std::invalid_argument);
    EXPECT_THROW(solve_fp(coeffs::constant(1, 1.0), std::vector<double>(8, 1.0), SpaceTimeGrid(g, 0.1, 2)),
                 std::invalid_argument);
}

TEST(Solver, DiagnosticsAndObserver) {
    const auto g = SpatialGrid::symmetric(1, 6.0, 128);
    std::ostringstream diag;
    SolverConfig cfg;
    cfg.diagnostics = &diag;
    cfg.store_every = 5;
    int calls = 0;
    const Field f = solve_fp(coeffs::ornstein_uhlenbeck(1), gaussian(g, 1.0), SpaceTimeGrid(g, 0.01, 20), cfg,
                             [&](int, double, std::span<const double>) { ++calls; });
    EXPECT_EQ(calls, 21);
    EXPECT_EQ(f.grid().steps, 4);
    EXPECT_DOUBLE_EQ(f.grid().dt, 0.05);
    std::istringstream in(diag.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step,t,mass,min_density,clipped_mass");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 20);
}

TEST(WeakResidual, SolverOutputsPass) {
    const auto g = SpatialGrid::symmetric(1, 10.0, 1024);
    const auto grid = SpaceTimeGrid::until(g, 1e-3, 1.0);
    for (const auto& c : {coeffs::constant(1, 0.5), coeffs::ornstein_uhlenbeck(1)}) {
        const Field f = solve_fp(c, gaussian(g, 1.0), grid);
        for (const auto& u : bump_family(g, grid.horizon())) {
            const auto r = weak_residual(f, c, u);
            EXPECT_TRUE(r.pass()) << r.normalized();
        }
    }
}

TEST(WeakResidual, OracleFieldPasses) {
    const SpaceTimeGrid grid(SpatialGrid::symmetric(1, 10.0, 1024), 1e-3, 1000);
    const Field f = oracle::sample(grid, [](double t) { return oracle::heat_solution(1.0, t); });
    const auto fam = bump_family(grid.space, 1.0);
    ASSERT_EQ(fam.size(), 5u);
    for (const auto& u : fam) EXPECT_LT(weak_residual(f, coeffs::constant(1, 0.5), u).normalized(), 1e-6);
}

TEST(WeakResidual, PerturbedFieldIsDetected) {
    const SpaceTimeGrid grid(SpatialGrid::symmetric(1, 10.0, 1024), 1e-3, 1000);
    const auto bump = spatial_bump(Vec::Constant(1, 0.0), 0.5);
    double bump_mass = 0.0;
    for (std::size_t i = 0; i < grid.space.size(); ++i) bump_mass += bump(grid.space.point(i));
    bump_mass *= grid.space.cell_volume();
    const Field f = Field::sample(grid, [&](double t, const Vec& x) {
        return oracle::heat_solution(1.0, t).density(x) + t * bump(x) / bump_mass;
    });
    const auto r = weak_residual(f, coeffs::constant(1, 0.5), bump_family(grid.space, 1.0)[0]);
    EXPECT_FALSE(r.pass());
}

TEST(WeakResidual, RefusesSupportOutsideBox) {
    const SpaceTimeGrid grid(SpatialGrid::symmetric(1, 2.0, 64), 0.1, 10);
    const Field f(grid);
    EXPECT_THROW(weak_residual(f, coeffs::constant(1, 1.0), bump_test_function(0.1, 0.5, Vec::Constant(1, 1.5), 1.0)),
                 RefusedError);
    TestFunction no_support = bump_test_function(0.1, 0.5, Vec::Constant(1, 0.0), 1.0);
    no_support.support.reset();
    EXPECT_THROW(weak_residual(f, coeffs::constant(1, 1.0), no_support), RefusedError);
}

TEST(InitialCondition, FirstLevelCloseToInitialLaw) {
    const auto g = SpatialGrid::symmetric(1, 10.0, 1024);
    const auto rho0 = gaussian(g, 1.0);
    const Field f = solve_fp(coeffs::constant(1, 0.5), rho0, SpaceTimeGrid(g, 1e-3, 10));
    std::vector<std::function<double(const Vec&)>> z;
    for (double c : {0.0, -0.5, 0.5}) z.push_back(spatial_bump(Vec::Constant(1, c), 1.0));
    const auto r1 = initial_condition_residual(f, rho0, z, 1);
    const auto r10 = initial_condition_residual(f, rho0, z, 10);
    EXPECT_LT(r1.deviation, 1e-3);
    EXPECT_LT(r1.deviation, r10.deviation);
    EXPECT_THROW(initial_condition_residual(f, rho0, {z[0]}), std::invalid_argument);
}
