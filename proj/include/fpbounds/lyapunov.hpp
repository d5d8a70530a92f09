#pragma once

// Lyapunov functions, drift conditions, and the weighted pointwise density bound.

#include "fpbounds/bounds.hpp"
#include "fpbounds/coeff.hpp"
#include "fpbounds/field.hpp"
#include "fpbounds/ladder.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace fpb {

/// Time-independent C^2 function with exact gradient and Hessian.
struct Potential {
    std::string family = "custom";
    double K = 0.0, r = 0.0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hess;

    double operator()(const Vec& x) const { return value(x); }

    /// c * this.
    [[nodiscard]] Potential scaled(double c) const {
        Potential p = *this;
        p.family = family + "_scaled";
        p.value = [f = value, c](const Vec& x) { return c * f(x); };
        p.grad = [f = grad, c](const Vec& x) -> Vec { return c * f(x); };
        p.hess = [f = hess, c](const Vec& x) -> Mat { return c * f(x); };
        return p;
    }
};

namespace detail {

// V(x) = F(|x|^2): grad = 2 F' x, hess = 2 F' I + 4 F'' x x^T.
inline Potential radial(std::string family, std::function<std::array<double, 3>(double)> F) {
    Potential p;
    p.family = std::move(family);
    p.value = [F](const Vec& x) { return F(x.squaredNorm())[0]; };
    p.grad = [F](const Vec& x) -> Vec { return 2.0 * F(x.squaredNorm())[1] * x; };
    p.hess = [F](const Vec& x) -> Mat {
        const auto f = F(x.squaredNorm());
        return 2.0 * f[1] * Mat::Identity(x.size(), x.size()) + 4.0 * f[2] * x * x.transpose();
    };
    return p;
}

}  // namespace detail

namespace potentials {

/// ln(|x|^2 + 1).
inline Potential log_sq() {
    return detail::radial("log_sq", [](double s) {
        const double u = 1.0 + s;
        return std::array<double, 3>{std::log(u), 1.0 / u, -1.0 / (u * u)};
    });
}

/// (ln(|x|^2 + 1))^2.
inline Potential log_sq_squared() {
    return detail::radial("log_sq_squared", [](double s) {
        const double u = 1.0 + s, l = std::log(u);
        return std::array<double, 3>{l * l, 2.0 * l / u, 2.0 / (u * u) - 2.0 * l / (u * u)};
    });
}

/// exp(K |x|^r) for |x| >= 1; inside the unit ball the quadratic in s = |x|^2 matching
/// value, first and second s-derivatives at s = 1.
inline Potential exp_power(double K, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("exp_power: r must be positive");
    const double e = std::exp(K);
    const double g1 = 0.5 * K * r * e;
    const double g2 = 0.25 * K * r * (r - 2.0 + K * r) * e;
    Potential p = detail::radial("exp_power", [=](double s) {
        if (s < 1.0) {
            const double z = s - 1.0;
            return std::array<double, 3>{e + g1 * z + 0.5 * g2 * z * z, g1 + g2 * z, g2};
        }
        const double h = 0.5 * r;
        const double sp = std::pow(s, h);
        const double G = std::exp(K * sp);
        const double d1 = K * h * std::pow(s, h - 1.0);
        const double d2 = K * h * (h - 1.0) * std::pow(s, h - 2.0);
        return std::array<double, 3>{G, d1 * G, (d2 + d1 * d1) * G};
    });
    p.K = K;
    p.r = r;
    return p;
}

/// |x|^2.
inline Potential square_norm() {
    return detail::radial("square_norm", [](double s) { return std::array<double, 3>{s, 1.0, 0.0}; });
}

inline Potential constant(double c) {
    Potential p;
    p.family = "constant";
    p.value = [c](const Vec&) { return c; };
    p.grad = [](const Vec& x) -> Vec { return Vec::Zero(x.size()); };
    p.hess = [](const Vec& x) -> Mat { return Mat::Zero(x.size(), x.size()); };
    return p;
}

}  // namespace potentials

/// L V = a^{ij} d_i d_j V + b^i d_i V for time-independent V.
inline double apply_L(const CoefficientField& c, const Potential& V, double t, const Vec& x) {
    return c.A(t, x).cwiseProduct(V.hess(x)).sum() + c.b(t, x).dot(V.grad(x));
}

struct LyapunovReport {
    double max_violation = 0.0;  ///< max of LV - c1 V - c2
    double min_c2 = 0.0;         ///< smallest c2 for the given c1
    Vec worst_point;
    bool pass = false;
    bool grows = false;  ///< V larger at every box corner than at the center
};

/// Samples LV <= c1 V + c2 on a node lattice of `box` (odd counts include the center).
inline LyapunovReport lyapunov_check(const Potential& V, const CoefficientField& c, double c1, double c2,
                                     const Box& box, int samples = 201, int time_slices = 16,
                                     double tolerance = 0.0) {
    LyapunovReport rep;
    rep.min_c2 = -std::numeric_limits<double>::infinity();
    for (double t : detail::sample_times(c, time_slices))
        detail::for_each_node(box, samples, [&](const Vec& x, const auto&) {
            const double v = apply_L(c, V, t, x) - c1 * V(x);
            if (v > rep.min_c2) {
                rep.min_c2 = v;
                rep.worst_point = x;
            }
        });
    rep.max_violation = rep.min_c2 - c2;
    rep.pass = rep.max_violation <= tolerance;
    Vec center(box.dim);
    for (int a = 0; a < box.dim; ++a) center[a] = 0.5 * (box.lo[a] + box.hi[a]);
    rep.grows = true;
    for (int corner = 0; corner < (1 << box.dim); ++corner) {
        Vec x(box.dim);
        for (int a = 0; a < box.dim; ++a) x[a] = (corner >> a) & 1 ? box.hi[a] : box.lo[a];
        if (!(V(x) > V(center))) rep.grows = false;
    }
    return rep;
}

enum class DriftForm {
    quadratic,  ///< <b,x> <= k1 |x|^2 + k2
    quad_log,   ///< <b,x> <= k1 |x|^2 ln(|x|+1) + k2
    power       ///< <b,x> <= c1 - c2 |x|^r, with c2 > 2 r K sup||A||
};

struct DriftParams {
    double k1 = 0.0, k2 = 0.0;          ///< quadratic / quad_log
    double c1 = 0.0, c2 = 0.0, r = 2.0;  ///< power
    double K = 0.0;                     ///< power: exponent of the weight
    std::optional<double> M;            ///< sup ||A||; declared bound or sampled when absent
};

struct DriftReport {
    double max_violation = 0.0;
    Vec worst_point;
    std::optional<bool> constant_ok;  ///< power form only, exact rational comparison
    double M = 0.0;
    bool pass = false;
};

inline DriftReport drift_condition(const CoefficientField& c, DriftForm form, const DriftParams& prm, const Box& box,
                                   int samples = 201, int time_slices = 16, double tolerance = 0.0) {
    DriftReport rep;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (double t : detail::sample_times(c, time_slices))
        detail::for_each_node(box, samples, [&](const Vec& x, const auto&) {
            const double bx = c.b(t, x).dot(x);
            const double n = x.norm();
            double bound = 0.0;
            switch (form) {
                case DriftForm::quadratic: bound = prm.k1 * n * n + prm.k2; break;
                case DriftForm::quad_log: bound = prm.k1 * n * n * std::log1p(n) + prm.k2; break;
                case DriftForm::power: bound = prm.c1 - prm.c2 * std::pow(n, prm.r); break;
            }
            if (bx - bound > rep.max_violation) {
                rep.max_violation = bx - bound;
                rep.worst_point = x;
            }
        });
    rep.pass = rep.max_violation <= tolerance;
    if (form == DriftForm::power) {
        rep.M = prm.M ? *prm.M : effective_constants(c, box).M;
        const bool ok = Rational(prm.c2) > Rational(2) * Rational(prm.r) * Rational(prm.K) * Rational(rep.M);
        rep.constant_ok = ok;
        rep.pass = rep.pass && ok;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Weighted pointwise bound

/// Desk-scale surrogate for finiteness of an integral over R^d: the value on the
/// inner box (fraction 0.8 of every half-width) agrees with the full-box value, and
/// the Richardson estimate from the coarsened field is small, both within 1%.
struct FiniteCheck {
    double value = 0.0;
    double inner = 0.0;
    double coarse_error = 0.0;
    bool finite = false;
};

namespace detail {

inline bool in_inner_box(const SpatialGrid& g, const Vec& x, double frac) {
    for (int a = 0; a < g.dim; ++a) {
        const double mid = 0.5 * (g.lo[a] + g.hi[a]), half = 0.5 * (g.hi[a] - g.lo[a]);
        if (std::abs(x[a] - mid) > frac * half) return false;
    }
    return true;
}

// fn(field, frac) evaluates the functional restricted to the inner box of fraction frac.
template <class Fn>
FiniteCheck finiteness(const Field& mu, Fn&& fn, double rel = 0.01, double inner = 0.8) {
    FiniteCheck f;
    f.value = fn(mu, 1.0);
    f.inner = fn(mu, inner);
    if (mu.can_coarsen()) f.coarse_error = std::abs(f.value - fn(mu.coarsened(), 1.0)) / 3.0;
    const double scale = std::abs(f.value);
    f.finite = std::isfinite(f.value) && std::abs(f.value - f.inner) <= rel * scale && f.coarse_error <= rel * scale;
    return f;
}

// int_0^tau int w(t,x) rho over the inner box of fraction frac.
template <class W>
double weighted_integral(const Field& f, double tau, double frac, W&& w) {
    const auto& sp = f.space();
    return space_time(f, tau, [&](double t, const Vec& x, double rho) {
        return in_inner_box(sp, x, frac) ? w(t, x) * rho : 0.0;
    });
}

// sup_{t <= tau} int w(x) rho(t,x) dx over the inner box of fraction frac.
template <class W>
double sup_weighted(const Field& f, double tau, double frac, W&& w) {
    const auto& g = f.grid();
    const auto& sp = g.space;
    const int last = g.steps == 0 ? 0 : last_level_within(g, tau);
    double m = 0.0;
    for (int k = 0; k <= last; ++k) {
        const auto s = f.slice(k);
        double acc = 0.0;
        for (std::size_t i = 0; i < sp.size(); ++i) {
            const Vec x = sp.point(i);
            if (in_inner_box(sp, x, frac)) acc += w(x) * s[i];
        }
        m = std::max(m, acc * sp.cell_volume());
    }
    return m;
}

}  // namespace detail

struct PointwiseReport {
    FiniteCheck phi_moment;      ///< int_0^tau int Phi^{1+eps} dmu
    FiniteCheck generator_term;  ///< int_0^tau int |L Phi|^{beta/2} Phi^{1-beta/2} dmu
    FiniteCheck flux_term;       ///< int_0^tau int |A grad Phi|^beta Phi^{1-beta} dmu
    FiniteCheck sup_moment;      ///< sup_t int Phi rho(t) dx
    double initial_weighted_sup = 0.0;  ///< sup rho(0) Phi
    double C_emp = 0.0;                 ///< sup over [0,tau] x box of Phi rho
    double C_emp_inner = 0.0;
    double C_emp_error = 0.0;
    double boundary_mass = 0.0;
    double phi_min = 0.0;
    bool pass = false;
    bool conclusive = true;
};

inline PointwiseReport pointwise_bound_check(const Field& mu, const Potential& phi, const CoefficientField& c,
                                             double tau, double beta, double epsilon = 0.1, double c_lower = 0.0) {
    const auto& g = mu.grid();
    const auto& sp = g.space;
    const int d = sp.dim;
    if (!(beta > d + 2)) throw RefusedError("thm33: requires beta > d + 2");
    if (!(epsilon > 0.0)) throw std::invalid_argument("thm33: epsilon must be positive");
    PointwiseReport rep;
    rep.phi_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sp.size(); ++i) rep.phi_min = std::min(rep.phi_min, phi(sp.point(i)));
    if (!(rep.phi_min > 0.0) || rep.phi_min < c_lower)
        throw RefusedError("thm33: weight below its lower bound on the grid");

    rep.phi_moment = detail::finiteness(mu, [&](const Field& f, double frac) {
        return detail::weighted_integral(f, tau, frac,
                                         [&](double, const Vec& x) { return std::pow(phi(x), 1.0 + epsilon); });
    });
    rep.generator_term = detail::finiteness(mu, [&](const Field& f, double frac) {
        return detail::weighted_integral(f, tau, frac, [&](double t, const Vec& x) {
            const double p = phi(x);
            return std::pow(std::abs(apply_L(c, phi, t, x)), 0.5 * beta) * std::pow(p, 1.0 - 0.5 * beta);
        });
    });
    rep.flux_term = detail::finiteness(mu, [&](const Field& f, double frac) {
        return detail::weighted_integral(f, tau, frac, [&](double t, const Vec& x) {
            const double p = phi(x);
            return std::pow((c.A(t, x) * phi.grad(x)).norm(), beta) * std::pow(p, 1.0 - beta);
        });
    });
    rep.sup_moment = detail::finiteness(
        mu, [&](const Field& f, double frac) { return detail::sup_weighted(f, tau, frac, [&](const Vec& x) { return phi(x); }); });

    auto sup_weighted_density = [&](const Field& f, double frac, int last_level) {
        double m = 0.0;
        for (int k = 0; k <= last_level; ++k) {
            const auto s = f.slice(k);
            for (std::size_t i = 0; i < f.space().size(); ++i) {
                const Vec x = f.space().point(i);
                if (detail::in_inner_box(f.space(), x, frac)) m = std::max(m, phi(x) * s[i]);
            }
        }
        return m;
    };
    const int last = g.steps == 0 ? 0 : last_level_within(g, tau);
    {
        const auto s0 = mu.slice(0);
        for (std::size_t i = 0; i < sp.size(); ++i)
            rep.initial_weighted_sup = std::max(rep.initial_weighted_sup, phi(sp.point(i)) * s0[i]);
    }
    rep.C_emp = sup_weighted_density(mu, 1.0, last);
    rep.C_emp_inner = sup_weighted_density(mu, 0.8, last);
    if (mu.can_coarsen()) {
        const Field cf = mu.coarsened();
        const int clast = cf.grid().steps == 0 ? 0 : last_level_within(cf.grid(), tau);
        rep.C_emp_error = std::abs(rep.C_emp - sup_weighted_density(cf, 1.0, clast));
    }
    rep.boundary_mass = max_boundary_mass(mu);
    rep.conclusive = rep.boundary_mass <= kBoundaryMassLimit;
    const bool sup_stable = std::abs(rep.C_emp - rep.C_emp_inner) <= 0.01 * rep.C_emp;
    rep.pass = rep.conclusive && rep.phi_moment.finite && rep.generator_term.finite && rep.flux_term.finite &&
               rep.sup_moment.finite && std::isfinite(rep.C_emp) && sup_stable;
    return rep;
}

struct Example31Report {
    double c1 = 0.0, c2 = 0.0;  ///< fitted power-form drift constants
    DriftReport drift;
    FiniteCheck b_moment;      ///< int_0^tau int |b|^beta dmu
    FiniteCheck exp_moment;    ///< int_0^tau int exp((2K+eps)|x|^r) dmu for the accepted eps
    double epsilon = 0.0;      ///< accepted eps (0 when none passed)
    FiniteCheck sup_moment;    ///< sup_t int exp(K|x|^r) rho(t) dx
    double envelope_C = 0.0;   ///< min C with |b| <= C exp(2K|x|^r / beta) on the samples
    std::optional<PointwiseReport> pointwise;
    bool pass = false;
};

/// Sufficient conditions for rho <= C(tau) exp(-K |x|^r). When c2 is not supplied it
/// is fitted as the minimum of -<b,x>/|x|^r on the outer shell R/2 <= |x| <= R;
/// c1 is then the smallest constant making the power-form drift bound hold.
inline Example31Report example31_audit(const CoefficientField& c, const Field& mu, double K, double r, double beta,
                                       double tau, std::optional<double> c2_given = std::nullopt,
                                       int samples = 201) {
    const auto& sp = mu.space();
    const int d = sp.dim;
    if (!(beta > d + 2)) throw RefusedError("example31: requires beta > d + 2");
    const Box box = Box::of(sp);
    double half = kInf;
    for (int a = 0; a < d; ++a) half = std::min(half, 0.5 * (sp.hi[a] - sp.lo[a]));
    Example31Report rep;
    const auto times = detail::sample_times(c, 16);
    if (c2_given) {
        rep.c2 = *c2_given;
    } else {
        rep.c2 = std::numeric_limits<double>::infinity();
        for (double t : times)
            detail::for_each_node(box, samples, [&](const Vec& x, const auto&) {
                const double n = x.norm();
                if (n < 0.5 * half || n > half) return;
                rep.c2 = std::min(rep.c2, -c.b(t, x).dot(x) / std::pow(n, r));
            });
    }
    rep.c1 = -std::numeric_limits<double>::infinity();
    for (double t : times)
        detail::for_each_node(box, samples, [&](const Vec& x, const auto&) {
            rep.c1 = std::max(rep.c1, c.b(t, x).dot(x) + rep.c2 * std::pow(x.norm(), r));
        });
    DriftParams prm;
    prm.c1 = rep.c1;
    prm.c2 = rep.c2;
    prm.r = r;
    prm.K = K;
    rep.drift = drift_condition(c, DriftForm::power, prm, box, samples);

    rep.b_moment = detail::finiteness(mu, [&](const Field& f, double frac) {
        return detail::weighted_integral(f, tau, frac,
                                         [&](double t, const Vec& x) { return std::pow(c.b(t, x).norm(), beta); });
    });
    for (double eps : {0.1, 0.05, 0.02, 0.01}) {
        rep.exp_moment = detail::finiteness(mu, [&](const Field& f, double frac) {
            return detail::weighted_integral(
                f, tau, frac, [&](double, const Vec& x) { return std::exp((2.0 * K + eps) * std::pow(x.norm(), r)); });
        });
        if (rep.exp_moment.finite) {
            rep.epsilon = eps;
            break;
        }
    }
    rep.sup_moment = detail::finiteness(mu, [&](const Field& f, double frac) {
        return detail::sup_weighted(f, tau, frac, [&](const Vec& x) { return std::exp(K * std::pow(x.norm(), r)); });
    });
    for (double t : times)
        detail::for_each_node(box, samples, [&](const Vec& x, const auto&) {
            rep.envelope_C =
                std::max(rep.envelope_C, c.b(t, x).norm() / std::exp(2.0 * K / beta * std::pow(x.norm(), r)));
        });
    rep.pass = rep.drift.pass && rep.b_moment.finite && rep.epsilon > 0.0 && rep.sup_moment.finite;
    if (rep.pass) {
        rep.pointwise = pointwise_bound_check(mu, potentials::exp_power(K, r), c, tau, beta);
        rep.pass = rep.pointwise->pass;
    }
    return rep;
}

}  // namespace fpb
