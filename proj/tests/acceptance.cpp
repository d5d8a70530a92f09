// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when any
// criterion fails.

#include "fpbounds/fpbounds.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#ifndef FPB_CLI
#define FPB_CLI "fpbounds_cli"
#endif

using namespace fpb;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kHeatL1 = 1e-3;
constexpr double kHeatSeconds = 30.0;
constexpr double kOuVariance = 1e-3;
constexpr double kResidual = 1e-4;
constexpr double kDetector = 1e-2;
constexpr double kFisherRel = 0.01;
constexpr double kSentinelRel = 1e-3;
constexpr double kConvolutionRel = 1e-10;
constexpr double kHolderRel = 1e-10;
constexpr double kLyapunovSlack = 1e-9;
constexpr double kPointwiseRel = 0.02;
constexpr double kFisherGrowth = 10.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<double> gaussian(const SpatialGrid& g, double var) {
    const auto st = oracle::GaussianState::isotropic(g.dim, var);
    std::vector<double> v(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) v[c] = st.density(g.point(c));
    return v;
}

double l1(const SpatialGrid& g, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s * g.cell_volume();
}

double second_moment(const SpatialGrid& g, std::span<const double> rho) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.point(i)[0] * g.point(i)[0] * rho[i];
    return s * g.cell_volume();
}

/// Fine solve plus the (N/2, 2 dt) companion used for solver-error bars.
struct Pair {
    Field fine, coarse;
};

Pair solve_pair(const CoefficientField& c, double var, const SpaceTimeGrid& grid) {
    const auto rho0 = gaussian(grid.space, var);
    Field fine = solve_fp(c, rho0, grid);
    Field coarse = solve_fp(c, grid.space.coarsen(rho0), SpaceTimeGrid(grid.space.coarsened(), 2 * grid.dt, grid.steps / 2));
    return {std::move(fine), std::move(coarse)};
}

const SpatialGrid kAcceptanceGrid = SpatialGrid::symmetric(1, 10.0, 2048);
constexpr double kAcceptanceDt = 2.5e-4;

// Shared runs, computed on first use.
const Field& heat_half() {
    static const Field f =
        solve_fp(coeffs::constant(1, 0.5), gaussian(kAcceptanceGrid, 1.0), SpaceTimeGrid::until(kAcceptanceGrid, kAcceptanceDt, 0.5));
    return f;
}
const Pair& heat_unit() {
    static const Pair p = solve_pair(coeffs::constant(1, 0.5), 1.0, SpaceTimeGrid::until(kAcceptanceGrid, kAcceptanceDt, 1.0));
    return p;
}
const Pair& ou_relax() {
    static const Pair p =
        solve_pair(coeffs::ornstein_uhlenbeck(1), 4.0, SpaceTimeGrid::until(kAcceptanceGrid, kAcceptanceDt, 1.0));
    return p;
}
const Pair& ou_stationary() {
    static const Pair p =
        solve_pair(coeffs::ornstein_uhlenbeck(1), 1.0, SpaceTimeGrid::until(kAcceptanceGrid, kAcceptanceDt, 1.0));
    return p;
}
const Field& ou_stationary_wide() {
    static const SpatialGrid g = SpatialGrid::symmetric(1, 12.0, 1024);
    static const Field f = solve_fp(coeffs::ornstein_uhlenbeck(1), gaussian(g, 1.0), SpaceTimeGrid::until(g, 2e-3, 1.0));
    return f;
}

Outcome heat_benchmark() {
    const auto grid = SpaceTimeGrid::until(kAcceptanceGrid, kAcceptanceDt, 0.5);
    const auto t0 = std::chrono::steady_clock::now();
    const Field f = solve_fp(coeffs::constant(1, 0.5), gaussian(kAcceptanceGrid, 1.0), grid);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double err = l1(kAcceptanceGrid, f.slice(grid.steps), gaussian(kAcceptanceGrid, 1.5));
    return {err <= kHeatL1 && secs <= kHeatSeconds, fmt("L1 error %.3e (<= %.0e), %.2f s (<= %.0f s)", err, kHeatL1, secs, kHeatSeconds)};
}

Outcome ou_benchmark() {
    const Field& f = ou_relax().fine;
    double worst = 0.0;
    for (double t : {0.25, 0.5, 0.75})
        worst = std::max(worst, std::abs(second_moment(f.space(), f.slice_at(t)) - (1.0 + 3.0 * std::exp(-2.0 * t))));
    return {worst <= kOuVariance, fmt("max variance error %.3e (<= %.0e)", worst, kOuVariance)};
}

Outcome weak_residuals() {
    double worst = 0.0;
    bool ok = true;
    const std::pair<const Field*, CoefficientField> runs[] = {{&heat_half(), coeffs::constant(1, 0.5)},
                                                              {&ou_relax().fine, coeffs::ornstein_uhlenbeck(1)}};
    for (const auto& [f, c] : runs)
        for (const auto& u : bump_family(f->space(), f->grid().horizon())) {
            const auto r = weak_residual(*f, c, u, kResidual);
            ok = ok && r.pass();
            worst = std::max(worst, r.normalized());
        }
    // Non-solution: heat field plus 0.1 times a fixed spatial bump.
    const Field& h = heat_half();
    const auto bump = spatial_bump(Vec::Zero(1), 1.0);
    Field perturbed = h;
    for (int k = 0; k < perturbed.slices(); ++k) {
        auto s = perturbed.slice(k);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += 0.1 * bump(h.space().point(i));
    }
    double detected = 0.0;
    for (double radius : {0.25, 0.5, 1.0, 2.0})
        for (const auto& u : bump_family(h.space(), h.grid().horizon(), radius))
            detected = std::max(detected, weak_residual(perturbed, coeffs::constant(1, 0.5), u).normalized());
    const bool flagged = detected > kDetector;
    return {ok && flagged, fmt("solver fields max %.3e (<= %.0e); perturbed field max %.3e (needs > %.0e; "
                               "above the residual tolerance by %.0fx)",
                               worst, kResidual, detected, kDetector, detected / kResidual)};
}

Outcome thm21() {
    const double tau = 0.9;
    auto eval = [&](const Pair& p, const CoefficientField& c, Thm21Form form) {
        return with_resolution_pair(bound_thm21(p.fine, c, tau, form), bound_thm21(p.coarse, c, tau, form));
    };
    const auto heat = eval(heat_unit(), coeffs::constant(1, 0.5), Thm21Form::printed);
    const auto ou = eval(ou_relax(), coeffs::ornstein_uhlenbeck(1), Thm21Form::printed);
    const auto heat_n = eval(heat_unit(), coeffs::constant(1, 0.5), Thm21Form::normalized);
    const auto ou_n = eval(ou_relax(), coeffs::ornstein_uhlenbeck(1), Thm21Form::normalized);
    const double rel = std::abs(heat.lhs - std::log1p(tau)) / std::log1p(tau);
    const bool ok = heat.verdict == Verdict::holds && heat.margin() >= 0.0 && ou.verdict == Verdict::holds &&
                    ou.margin() >= 0.0 && rel <= kFisherRel;
    return {ok, fmt("printed bound: heat %s margin %.4g, OU %s margin %.4g; heat lhs vs ln(1.9) rel %.2e (<= %.0e); "
                    "with ln Z_d: heat %s margin %.4g, OU %s margin %.4g",
                    to_string(heat.verdict), heat.margin(), to_string(ou.verdict), ou.margin(), rel, kFisherRel,
                    to_string(heat_n.verdict), heat_n.margin(), to_string(ou_n.verdict), ou_n.margin())};
}

Outcome thm22_sentinel() {
    const auto c = coeffs::ornstein_uhlenbeck(1);
    const auto r = with_resolution_pair(bound_thm22(ou_stationary().fine, c, 0.9), bound_thm22(ou_stationary().coarse, c, 0.9));
    const double rel = std::abs(r.margin()) / r.lhs;
    const bool ok = std::abs(r.margin()) <= r.error && rel <= kSentinelRel;
    return {ok, fmt("|margin| %.3e vs error bar %.3e; relative %.3e (<= %.0e)", std::abs(r.margin()), r.error, rel,
                    kSentinelRel)};
}

Outcome convolution() {
    std::uniform_real_distribution<double> U;
    std::normal_distribution<double> N;
    int violations = 0;
    double worst = kInf;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(seed);
        const auto g = seed % 2 == 0 ? SpatialGrid::symmetric(1, 3.0, 64) : SpatialGrid::symmetric(2, 3.0, 12);
        std::vector<double> f1(g.size()), f2(g.size()), psi(g.size());
        for (std::size_t c = 0; c < g.size(); ++c) {
            f1[c] = U(rng) < 0.2 ? 0.0 : U(rng);
            f2[c] = U(rng) < 0.2 ? 0.0 : U(rng);
            psi[c] = N(rng);
        }
        const auto gap = convolution_inequality_gap(g, f1, f2, psi);
        worst = std::min(worst, gap.gap() / gap.rhs);
        if (gap.gap() < -kConvolutionRel * gap.rhs) ++violations;
    }
    return {violations == 0, fmt("%d violations in 200 triples; min relative gap %.3e", violations, worst)};
}

Outcome lemma31() {
    bool exact = true;
    const std::tuple<int, Rational, Rational> cases[] = {
        {3, Rational(3), Rational(4)}, {3, Rational(5, 2), Rational(20, 3)}, {4, Rational(3), Rational(3)}, {5, Rational(3), Rational(12, 5)}};
    for (const auto& [d, p, q] : cases) {
        const Rational dd(d);
        exact = exact && Rational(1) / q + dd / (2 * p) == dd / 4 && dd / 2 - dd / p == Rational(2) / q;
    }
    const auto g = SpatialGrid::symmetric(3, 4.0, 16);
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    int violated = 0;
    for (int i = 0; i < 100; ++i) {
        const Field f = random_band_limited(g, 6, rng);
        const auto rep = interpolation_check_lemma31(f, Rational(3), Rational(4), 0.0);
        worst = std::max(worst, rep.max_relative_violation);
        if (rep.max_relative_violation > kHolderRel) ++violated;
        exact = exact && rep.delta == Rational(1, 2);
    }
    return {exact && violated == 0,
            fmt("exponent algebra %s; %d of 100 fields violate (worst relative %.2e, tol %.0e)", exact ? "exact" : "BROKEN",
                violated, worst, kHolderRel)};
}

Outcome ladders() {
    const auto st = moser_ladder_thm31(3, 4);
    const std::vector<std::pair<Rational, Rational>> want{{3, 1}, {5, Rational(5, 3)}, {7, Rational(7, 3)}, {9, 3}};
    bool seq = st.p.size() == 4;
    for (std::size_t n = 0; seq && n < 4; ++n) seq = st.p[n] == want[n].first && st.q[n] == want[n].second;
    bool audits = true, finite = true;
    std::string certs;
    for (const auto& [d, beta] : std::vector<std::pair<int, Rational>>{{3, Rational(6)}, {3, Rational(10)}, {4, Rational(7)}}) {
        const auto l = moser_ladder_thm32(d, beta, 20, 1.0, 1.0, 1.0);
        const Rational bd = beta;
        for (int n = 1; n < 20; ++n) {
            const Rational k = l.ladder.p[n] * Rational(d) / (d + 2) - 1;
            audits = audits && l.ladder.p[n - 1] == k * bd / (bd - 2) + 1 &&
                     l.ladder.p[n - 1] * (bd - 2) / bd - l.ladder.p[n] * Rational(d) / (d + 2) == Rational(-2) / bd;
        }
        audits = audits && l.ladder.all_audits_pass();
        finite = finite && l.certificate.finite;
        certs += fmt(" (%d,%s): %.6g", d, to_string(beta).c_str(), l.certificate.bound);
    }
    return {seq && audits && finite, fmt("d=3 sequence %s; step identities %s; certificates%s", seq ? "exact" : "WRONG",
                                         audits ? "exact" : "BROKEN", certs.c_str())};
}

Outcome lyapunov() {
    const auto c = coeffs::ornstein_uhlenbeck(1);
    const auto lv = lyapunov_check(potentials::log_sq(), c, 0.0, 2.0 + kLyapunovSlack, Box::symmetric(1, 12.0));
    const auto light = example31_audit(c, ou_stationary_wide(), 0.2, 2.0, 6.0, 0.5);
    const auto heavy = example31_audit(c, ou_stationary_wide(), 0.3, 2.0, 6.0, 0.5);
    const bool heavy_fails = heavy.drift.constant_ok.has_value() && !*heavy.drift.constant_ok && !heavy.pass;
    const bool exact = !(Rational(1) > Rational(2) * Rational(2) * Rational(3, 10));
    return {lv.pass && light.pass && heavy_fails && exact,
            fmt("ln(x^2+1): min c2 %.12g %s; K=0.2 %s (C %.4g); K=0.3 constant check %s", lv.min_c2,
                lv.pass ? "passes" : "FAILS", light.pass ? "passes" : "FAILS",
                light.pointwise ? light.pointwise->C_emp : 0.0, heavy_fails ? "fails" : "PASSES")};
}

Outcome pointwise() {
    const auto rep = pointwise_bound_check(ou_stationary_wide(), potentials::exp_power(1.0, 1.0),
                                           coeffs::ornstein_uhlenbeck(1), 0.5, 4.0);
    const double want = std::exp(0.5) / std::sqrt(2.0 * std::numbers::pi);
    const double rel = std::abs(rep.C_emp - want) / want;
    const auto heat = pointwise_bound_check(heat_unit().fine, potentials::exp_power(1.0, 2.0), coeffs::constant(1, 0.5),
                                            1.0, 4.0);
    const bool flagged = !heat.phi_moment.finite;
    return {rep.pass && rel <= kPointwiseRel && flagged,
            fmt("C_emp %.6f vs %.6f (rel %.2e, <= %.0e); heat with exp(x^2) %s", rep.C_emp, want, rel, kPointwiseRel,
                flagged ? "flagged non-finite" : "NOT flagged")};
}

Outcome dirac_limit() {
    const SpatialGrid g = SpatialGrid::symmetric(1, 6.0, 8192);
    const double tau = 0.5, dt = 1e-5;
    auto fisher_integral = [&](double var) {
        double acc = 0.0, prev = 0.0;
        solve_fp(coeffs::constant(1, 0.5), gaussian(g, var), SpaceTimeGrid::until(g, dt, tau), {.store_every = 50000},
                 [&](int k, double, std::span<const double> rho) {
                     const double v = fisher(g, rho);
                     if (k > 0) acc += 0.5 * dt * (prev + v);
                     prev = v;
                 });
        return acc;
    };
    const double wide = fisher_integral(1e-2), narrow = fisher_integral(1e-4);
    const double ratio = narrow / wide;
    return {ratio >= kFisherGrowth,
            fmt("int_0^0.5 I dt: %.4f at var 1e-2, %.4f at var 1e-4 (ratio %.3f, needs >= %.0f; oracle ln(1+tau/var) "
                "ratio %.3f)",
                wide, narrow, ratio, kFisherGrowth, std::log1p(tau / 1e-4) / std::log1p(tau / 1e-2))};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    const fs::path base = fs::temp_directory_path() / ("fpb_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(base);
    int rc[2];
    for (int i = 0; i < 2; ++i) {
        const std::string cmd = std::string("\"") + FPB_CLI + "\" --out \"" + (base / std::to_string(i)).string() +
                                "\" run heat_d1 > /dev/null 2>&1";
        rc[i] = std::system(cmd.c_str());
    }
    const std::string a = slurp(base / "0" / "ledger.csv"), b = slurp(base / "1" / "ledger.csv");
    const bool same = !a.empty() && a == b && slurp(base / "0" / "ledger.txt") == slurp(base / "1" / "ledger.txt");
    fs::remove_all(base);
    return {rc[0] == 0 && rc[1] == 0 && same,
            fmt("exit codes %d/%d; ledgers %s (%zu bytes)", rc[0], rc[1], same ? "byte-identical" : "DIFFER", a.size())};
}

}  // namespace

int main() {
    const std::pair<const char*, Outcome (*)()> criteria[] = {
        {"heat benchmark", heat_benchmark},
        {"OU benchmark", ou_benchmark},
        {"weak residual and detector", weak_residuals},
        {"Fisher integral bound", thm21},
        {"weighted Fisher equality sentinel", thm22_sentinel},
        {"convolution inequality", convolution},
        {"interpolation core", lemma31},
        {"exponent ladders", ladders},
        {"Lyapunov and Gaussian-tail audit", lyapunov},
        {"weighted pointwise bound", pointwise},
        {"Dirac-limit Fisher growth", dirac_limit},
        {"determinism", determinism},
    };
    int failed = 0, index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << std::setw(2) << index << ' ' << name << ": " << o.detail
                  << std::endl;
    }
    std::cout << (12 - failed) << " of 12 criteria pass\n";
    return failed == 0 ? 0 : 1;
}
