#pragma once

// Evaluators for the a-priori inequalities: Fisher-information bounds, the
// shell diagnostic for unbounded A, the interpolation step, and the energy
// estimates feeding the Moser iteration.

#include "fpbounds/coeff.hpp"
#include "fpbounds/field.hpp"
#include "fpbounds/ladder.hpp"
#include "fpbounds/oracle.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace fpb {

enum class Verdict { holds, violated, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::violated: return "violated";
        default: return "inconclusive";
    }
}

/// One evaluated inequality lhs <= rhs.
struct BoundReport {
    std::string check;  ///< check family, e.g. "thm21"
    std::string name;   ///< instance label
    double lhs = 0.0;
    double rhs = 0.0;
    double error = 0.0;  ///< combined quadrature and truncation error bar
    Verdict verdict = Verdict::inconclusive;
    bool conclusive = true;  ///< false when a precondition for any verdict failed
    std::vector<std::pair<std::string, double>> inputs;
    std::string note;

    [[nodiscard]] double margin() const { return rhs - lhs; }

    /// Sets the verdict from margin and error bar unless already refused.
    void decide(bool ok = true) {
        conclusive = ok;
        if (!conclusive || !std::isfinite(lhs) || !std::isfinite(rhs) || !std::isfinite(error))
            verdict = Verdict::inconclusive;
        else
            verdict = margin() >= -error ? Verdict::holds : Verdict::violated;
    }

    [[nodiscard]] double input(const std::string& key) const {
        for (const auto& [k, v] : inputs)
            if (k == key) return v;
        throw std::out_of_range("report has no input " + key);
    }
};

/// Folds the discretization error of the underlying solve into a report: `coarse`
/// is the same check evaluated on a solve with doubled h and dt; each side gets
/// the Richardson error |F_h - F_2h| / 3.
inline BoundReport with_resolution_pair(BoundReport fine, const BoundReport& coarse) {
    const double extra = (std::abs(fine.lhs - coarse.lhs) + std::abs(fine.rhs - coarse.rhs)) / 3.0;
    fine.inputs.emplace_back("solver_error", extra);
    fine.error += extra;
    fine.decide(fine.conclusive);
    return fine;
}

/// Boundary mass above which verdicts are refused.
inline constexpr double kBoundaryMassLimit = 1e-4;

/// Z_d = int max(|x|,1)^{-d-1} dx = |S^{d-1}| (d+1)/d.
inline double tail_normalizer(int d) {
    const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
    return sphere * (d + 1.0) / d;
}

namespace detail {

inline double truncation_error(const Field& mu, double tau, double scale) {
    double worst = 0.0;
    const int last = mu.grid().steps == 0 ? 0 : last_level_within(mu.grid(), tau);
    for (int k = 0; k <= last; ++k) worst = std::max(worst, std::abs(1.0 - mu.mass(k)));
    return worst * std::abs(scale);
}

// int_0^tau int fn(t, x, rho) dx dt, midpoint in space, trapezoid in time.
template <class Fn>
double space_time(const Field& mu, double tau, Fn&& fn) {
    const auto& g = mu.grid();
    const auto& sp = g.space;
    std::vector<Vec> pts(sp.size());
    for (std::size_t i = 0; i < sp.size(); ++i) pts[i] = sp.point(i);
    return time_integral(g, tau, [&](int k) {
        const auto s = mu.slice(k);
        const double t = g.time(k);
        double acc = 0.0;
        for (std::size_t i = 0; i < sp.size(); ++i)
            if (s[i] != 0.0) acc += fn(t, pts[i], s[i]);
        return acc * sp.cell_volume();
    });
}

inline std::vector<double> slice_at_tau(const Field& mu, double tau) {
    if (mu.grid().steps == 0) return {mu.slice(0).begin(), mu.slice(0).end()};
    return mu.slice_at(tau);
}

inline double lambda_weight(const Vec& x) { return std::log(std::max(x.norm(), 1.0)); }

}  // namespace detail

enum class Thm21Form {
    printed,    ///< entropy term bounded by (d+1) int rho Lambda only
    normalized  ///< adds the normalizing constant ln Z_d of max(|x|,1)^{-d-1}
};

/// Fisher time integral against
///   a^-2 (||b||_{2,mu} + lambda d^{3/2} sqrt(gamma))^2 + 2 ln2 / a + (2/a) int rho0 ln rho0
///     + (2/a)(d+1) int rho(tau) Lambda  [+ (2/a) ln Z_d],
/// gamma = int |x|^4 g dx = d(d+2), Lambda = ln max(|x|,1), norms over [0, tau].
inline BoundReport bound_thm21(const Field& mu, const CoefficientField& c, double tau,
                               Thm21Form form = Thm21Form::normalized) {
    const auto& sp = mu.space();
    const int d = sp.dim;
    const auto consts = effective_constants(c, Box::of(sp));
    if (!(consts.alpha > 0.0)) throw RefusedError("thm21: ellipticity constant must be positive");
    const double a = consts.alpha, lam = consts.lambda;
    const double gamma = d * (d + 2.0);

    BoundReport r;
    r.check = "thm21";
    r.name = form == Thm21Form::printed ? "printed" : "normalized";

    struct Parts {
        double b_norm, entropy0, log_tau, lambda_sq, rhs;
    };
    auto parts_of = [&](const Field& f) {
        Parts p{};
        p.b_norm = std::sqrt(detail::space_time(
            f, tau, [&](double t, const Vec& x, double rho) { return c.b(t, x).squaredNorm() * rho; }));
        p.entropy0 = entropy(f.space(), f.slice(0));
        const auto st = detail::slice_at_tau(f, tau);
        double lt = 0.0;
        for (std::size_t i = 0; i < st.size(); ++i) lt += detail::lambda_weight(f.space().point(i)) * st[i];
        p.log_tau = lt * f.space().cell_volume();
        p.lambda_sq = detail::space_time(f, tau, [](double, const Vec& x, double rho) {
            const double l = detail::lambda_weight(x);
            return l * l * rho;
        });
        const double lead = p.b_norm + lam * std::pow(d, 1.5) * std::sqrt(gamma);
        p.rhs = lead * lead / (a * a) + 2.0 * std::numbers::ln2 / a + 2.0 / a * p.entropy0 +
                2.0 / a * (d + 1.0) * p.log_tau;
        if (form == Thm21Form::normalized) p.rhs += 2.0 / a * std::log(tail_normalizer(d));
        return p;
    };

    const Estimate lhs = with_error(mu, [&](const Field& f) { return fisher_time_integral(f, tau); });
    const Parts parts = parts_of(mu);
    double rhs_err = 0.0;
    if (mu.can_coarsen()) rhs_err = std::abs(parts.rhs - parts_of(mu.coarsened()).rhs) / 3.0;
    r.lhs = lhs.value;
    r.rhs = parts.rhs;
    r.error = lhs.error + rhs_err + detail::truncation_error(mu, tau, std::max(std::abs(r.lhs), std::abs(r.rhs)));
    const double bmass = max_boundary_mass(mu);
    r.inputs = {{"alpha", a},
                {"lambda", lam},
                {"d", d},
                {"gamma", gamma},
                {"tau", tau},
                {"b_norm_2_mu", parts.b_norm},
                {"entropy0", parts.entropy0},
                {"lambda_moment_tau", parts.log_tau},
                {"lambda_sq_mu", parts.lambda_sq},
                {"boundary_mass", bmass}};
    // Integrability that comes with a finite Fisher integral: L^{d/(d-2),1} for d > 2, L^{2,1} for d = 2.
    if (d >= 2) {
        const double pexp = d > 2 ? d / (d - 2.0) : 2.0;
        r.inputs.emplace_back("integrability_p", pexp);
        r.inputs.emplace_back("rho_norm_p_1", mixed_norm(mu, {pexp, 1.0, tau}));
    }
    bool conclusive = std::isfinite(parts.entropy0) && std::isfinite(parts.lambda_sq);
    if (bmass > kBoundaryMassLimit) {
        conclusive = false;
        r.note = "boundary mass above limit";
    }
    r.decide(conclusive);
    return r;
}

/// int_0^tau int <A grad rho, grad rho>/rho dx dt against
///   int_0^tau int <A^{-1} b0, b0> rho dx dt + 2 (H(rho0) - H(rho_tau)),  H = int rho ln rho.
inline BoundReport bound_thm22(const Field& mu, const CoefficientField& c, double tau) {
    const auto& sp = mu.space();
    for (std::size_t i = 0; i < sp.size(); i += std::max<std::size_t>(1, sp.size() / 257))
        if (!(min_eigenvalue(c.A(0.0, sp.point(i))) > 0.0)) throw RefusedError("thm22: A is singular on the grid");

    auto drift_part = [&](const Field& f) {
        return detail::space_time(f, tau, [&](double t, const Vec& x, double rho) {
            const Mat a = c.A(t, x);
            const Vec b0 = reduced_drift_b0(c, t, x);
            return b0.dot(a.ldlt().solve(b0)) * rho;
        });
    };
    auto rhs_of = [&](const Field& f) {
        const auto st = detail::slice_at_tau(f, tau);
        return drift_part(f) + 2.0 * (entropy(f.space(), f.slice(0)) - entropy(f.space(), st));
    };

    BoundReport r;
    r.check = "thm22";
    r.name = "weighted_fisher";
    const Estimate lhs = with_error(mu, [&](const Field& f) { return weighted_fisher(f, c, tau); });
    const Estimate rhs = with_error(mu, rhs_of);
    r.lhs = lhs.value;
    r.rhs = rhs.value;
    r.error = lhs.error + rhs.error + detail::truncation_error(mu, tau, std::max(std::abs(r.lhs), std::abs(r.rhs)));
    const double log4 = detail::space_time(mu, tau, [](double, const Vec& x, double rho) {
        return std::pow(std::log1p(x.norm()), 4) * rho;
    });
    const double bmass = max_boundary_mass(mu);
    r.inputs = {{"tau", tau},
                {"b0_A_norm_sq", drift_part(mu)},
                {"log1p_fourth_moment", log4},
                {"boundary_mass", bmass}};
    bool conclusive = std::isfinite(log4);
    if (bmass > kBoundaryMassLimit) {
        conclusive = false;
        r.note = "boundary mass above limit";
    }
    r.decide(conclusive);
    return r;
}

/// D(r) = int_0^T int_{r <= |x| <= 2r} [r^-4 ||A||^2 + r^-2 Theta_A^2] rho dx dt per radius.
struct ShellDiagnostic {
    std::vector<std::pair<double, double>> values;  ///< (r, D(r))
    bool vanishing = false;   ///< min D(r) <= tolerance
    bool decreasing = false;  ///< D non-increasing along the radii
    double tolerance = 1e-3;
};

inline ShellDiagnostic condition_213_diagnostic(const Field& mu, const CoefficientField& c,
                                                const std::vector<double>& radii, double tolerance = 1e-3) {
    const auto& sp = mu.space();
    double half = kInf;
    for (int a = 0; a < sp.dim; ++a) half = std::min(half, 0.5 * (sp.hi[a] - sp.lo[a]));
    ShellDiagnostic out;
    out.tolerance = tolerance;
    for (double r : radii) {
        if (!(r > 0.0) || r >= half) throw std::invalid_argument("cond213: radius must lie inside the box");
        const double D = detail::space_time(mu, mu.grid().horizon() > 0 ? mu.grid().horizon() : 1.0,
                                            [&](double t, const Vec& x, double rho) {
                                                const double n = x.norm();
                                                if (n < r || n > 2.0 * r) return 0.0;
                                                const double an = operator_norm(c.A(t, x));
                                                const double th = theta_A(c, t, x);
                                                return (an * an / std::pow(r, 4) + th * th / (r * r)) * rho;
                                            });
        out.values.emplace_back(r, D);
    }
    double mn = kInf;
    out.decreasing = true;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        mn = std::min(mn, out.values[i].second);
        if (i > 0 && out.values[i].second > out.values[i - 1].second * (1.0 + 1e-12) + 1e-300)
            out.decreasing = false;
    }
    out.vanishing = mn <= tolerance;
    return out;
}

/// Interpolation step: per-slice Holder core and the empirical constant.
struct InterpolationReport {
    BoundReport core;            ///< worst slice of ||u||_p <= ||u||_{2d/(d-2)}^delta ||u||_2^{1-delta}
    double max_relative_violation = 0.0;
    double empirical_constant = 0.0;  ///< ||u||_{p,q,tau} / (||grad u||_{L2} + ||u||_{2,inf,tau})
    Rational delta;
};

inline InterpolationReport interpolation_check_lemma31(const Field& u, const Rational& p, const Rational& q,
                                                       double tau) {
    const int d = u.space().dim;
    if (d <= 2) throw RefusedError("lemma31: requires d > 2");
    const Rational dd(d);
    if (Rational(1) / q + dd / (2 * p) != dd / 4) throw RefusedError("lemma31: exponent relation violated");
    if (q < 2 || !(p > 2) || p > 2 * dd / (dd - 2)) throw RefusedError("lemma31: exponents out of range");
    InterpolationReport out;
    out.delta = dd / 2 - dd / p;
    if (out.delta != Rational(2) / q) throw RefusedError("lemma31: delta differs from 2/q");
    const double pd = to_double(p), qd = to_double(q), del = to_double(out.delta);
    const double pstar = 2.0 * d / (d - 2.0);

    const auto& g = u.grid();
    const int last = g.steps == 0 ? 0 : last_level_within(g, tau);
    BoundReport& core = out.core;
    core.check = "lemma31";
    core.name = "holder_core";
    double worst = -kInf;
    for (int k = 0; k <= last; ++k) {
        const auto s = u.slice(k);
        const double l = detail::slice_lp(g.space, s, pd);
        const double r = std::pow(detail::slice_lp(g.space, s, pstar), del) *
                         std::pow(detail::slice_lp(g.space, s, 2.0), 1.0 - del);
        const double rel = r > 0.0 ? (l - r) / r : (l > 0.0 ? kInf : 0.0);
        if (rel > worst) {
            worst = rel;
            core.lhs = l;
            core.rhs = r;
        }
    }
    out.max_relative_violation = std::max(0.0, worst);
    core.error = 1e-10 * std::abs(core.rhs);
    core.inputs = {{"d", d}, {"p", pd}, {"q", qd}, {"delta", del}, {"tau", tau}};

    const double num = mixed_norm(u, {pd, qd, tau});
    const double grad_l2 = std::sqrt(detail::time_integral(g, tau, [&](int k) {
        const auto gr = gradient(g.space, u.slice(k));
        double s = 0.0;
        for (double v : gr) s += v * v;
        return s * g.space.cell_volume();
    }));
    const double den = grad_l2 + mixed_norm(u, {2.0, kInf, tau});
    out.empirical_constant = den > 0.0 ? num / den : 0.0;
    core.inputs.emplace_back("empirical_constant", out.empirical_constant);
    core.decide();
    return out;
}

enum class Lemma32Mode {
    sup_norm,   ///< sup_t ||b(t)||_{L^s(mu_t)} finite; time integral of spatial norms
    space_time  ///< |b| in L^s(mu); space-time norm
};

/// Energy estimate with the traceable constant C = (2/alpha^2) max(d^3 lambda^2, 1) (gamma(s) + B(s)):
///   2/(alpha k(k+1)) int rho(tau)^{k+1} + int_0^tau int |grad rho|^2 rho^{k-1}
///     <= C T + 2/(alpha k(k+1)) int rho(0)^{k+1},
/// T = int_0^tau (int rho^{ks/(s-2)+1})^{(s-2)/s} dt     (sup_norm)
///   = (int_0^tau int rho^{ks/(s-2)+1})^{(s-2)/s}          (space_time).
inline BoundReport lemma32_report(const Field& mu, const CoefficientField& c, double k, double s, double tau,
                                  Lemma32Mode mode = Lemma32Mode::sup_norm) {
    if (!(s > 2.0)) throw RefusedError("lemma32: requires s > 2");
    if (mode == Lemma32Mode::sup_norm && !(k >= 2.0 / s - 1e-15)) throw RefusedError("lemma32: requires k >= 2/s");
    if (mode == Lemma32Mode::space_time && !(k > 0.0)) throw RefusedError("lemma32: requires k > 0");
    const auto& sp = mu.space();
    const int d = sp.dim;
    const auto consts = effective_constants(c, Box::of(sp));
    if (!(consts.alpha > 0.0)) throw RefusedError("lemma32: ellipticity constant must be positive");
    const double a = consts.alpha, lam = consts.lambda;
    const double Cbase = 2.0 / (a * a) * std::max(d * d * d * lam * lam, 1.0);
    const double gam = oracle::gamma_s(d, s);
    const double expo = k * s / (s - 2.0) + 1.0;
    const double w = 2.0 / (a * k * (k + 1.0));

    auto b_norm_sq = [&](const Field& f) {
        const auto& g = f.grid();
        if (mode == Lemma32Mode::space_time) {
            const double v = detail::space_time(
                f, tau, [&](double t, const Vec& x, double rho) { return std::pow(c.b(t, x).norm(), s) * rho; });
            return std::pow(v, 2.0 / s);
        }
        double m = 0.0;
        const int last = g.steps == 0 ? 0 : last_level_within(g, tau);
        for (int kk = 0; kk <= last; ++kk) {
            const auto sl = f.slice(kk);
            double acc = 0.0;
            for (std::size_t i = 0; i < f.space().size(); ++i)
                if (sl[i] != 0.0) acc += std::pow(c.b(g.time(kk), f.space().point(i)).norm(), s) * sl[i];
            m = std::max(m, std::pow(acc * f.space().cell_volume(), 2.0 / s));
        }
        return m;
    };
    auto power_integral = [](const SpatialGrid& g, std::span<const double> v, double e) {
        double acc = 0.0;
        for (double x : v)
            if (x > 0.0) acc += std::pow(x, e);
        return acc * g.cell_volume();
    };
    auto lhs_of = [&](const Field& f) {
        const auto st = detail::slice_at_tau(f, tau);
        const double grad_term = detail::time_integral(f.grid(), tau, [&](int kk) {
            const auto sl = f.slice(kk);
            const auto gr = gradient(f.space(), sl);
            const double floor = density_floor(sl);
            const std::size_t n = f.space().size();
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sl[i] <= floor) continue;
                double g2 = 0.0;
                for (int ax = 0; ax < d; ++ax) g2 += gr[ax * n + i] * gr[ax * n + i];
                acc += g2 * std::pow(sl[i], k - 1.0);
            }
            return acc * f.space().cell_volume();
        });
        return w * power_integral(f.space(), st, k + 1.0) + grad_term;
    };
    auto T_of = [&](const Field& f) {
        if (mode == Lemma32Mode::space_time)
            return std::pow(detail::time_integral(f.grid(), tau,
                                                  [&](int kk) { return power_integral(f.space(), f.slice(kk), expo); }),
                            (s - 2.0) / s);
        return detail::time_integral(f.grid(), tau, [&](int kk) {
            return std::pow(power_integral(f.space(), f.slice(kk), expo), (s - 2.0) / s);
        });
    };
    auto rhs_of = [&](const Field& f) {
        return Cbase * (gam + b_norm_sq(f)) * T_of(f) + w * power_integral(f.space(), f.slice(0), k + 1.0);
    };

    BoundReport r;
    r.check = "lemma32";
    r.name = mode == Lemma32Mode::sup_norm ? "sup_norm" : "space_time";
    const Estimate lhs = with_error(mu, lhs_of);
    const Estimate rhs = with_error(mu, rhs_of);
    r.lhs = lhs.value;
    r.rhs = rhs.value;
    r.error = lhs.error + rhs.error;
    const double B = b_norm_sq(mu);
    r.inputs = {{"alpha", a},         {"lambda", lam},       {"d", d},          {"k", k},
                {"s", s},             {"tau", tau},          {"C", Cbase},      {"gamma_s", gam},
                {"B_s", B},           {"exponent", expo},    {"time_exponent", k + (s - 2.0) / s},
                {"T", T_of(mu)},      {"boundary_mass", max_boundary_mass(mu)}};
    bool conclusive = std::isfinite(B);
    if (r.input("boundary_mass") > kBoundaryMassLimit) {
        conclusive = false;
        r.note = "boundary mass above limit";
    }
    r.decide(conclusive);
    return r;
}

}  // namespace fpb
