#pragma once

// Closed-form Gaussian reference solutions and their functionals.

#include "fpbounds/grid.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

namespace fpb::oracle {

/// Gaussian with mean m and diagonal covariance diag(var).
struct GaussianState {
    Vec mean;
    Vec var;

    GaussianState(Vec m, Vec v) : mean(std::move(m)), var(std::move(v)) {
        if (mean.size() != var.size() || var.size() < 1) throw std::invalid_argument("gaussian: size mismatch");
        if (!(var.array() > 0.0).all()) throw std::invalid_argument("gaussian: variances must be positive");
    }

    static GaussianState isotropic(int d, double v, double m = 0.0) {
        return {Vec::Constant(d, m), Vec::Constant(d, v)};
    }

    [[nodiscard]] int dim() const { return static_cast<int>(var.size()); }

    [[nodiscard]] double density(const Vec& x) const {
        double e = 0.0, norm = 1.0;
        for (int i = 0; i < dim(); ++i) {
            const double z = x[i] - mean[i];
            e += z * z / var[i];
            norm *= 2.0 * std::numbers::pi * var[i];
        }
        return std::exp(-0.5 * e) / std::sqrt(norm);
    }
};

/// Heat flow with A = a I, b = 0 from N(0, sigma0_sq I): variance sigma0_sq + 2 a t.
inline GaussianState heat_solution(double sigma0_sq, double t, int d = 1, double a = 0.5) {
    if (t < 0.0) throw std::invalid_argument("heat_solution: negative time");
    return GaussianState::isotropic(d, sigma0_sq + 2.0 * a * t);
}

/// OU with A = a I, b = -theta (x): mean m0 e^{-theta t}, variance a/theta + (s0 - a/theta) e^{-2 theta t}.
inline GaussianState ou_solution(double m0, double sigma0_sq, double t, int d = 1, double a = 1.0,
                                 double theta = 1.0) {
    if (t < 0.0) throw std::invalid_argument("ou_solution: negative time");
    const double stat = a / theta;
    return GaussianState::isotropic(d, stat + (sigma0_sq - stat) * std::exp(-2.0 * theta * t),
                                    m0 * std::exp(-theta * t));
}

/// int rho ln rho dx.
inline double entropy(const GaussianState& s) {
    double e = 0.0;
    for (int i = 0; i < s.dim(); ++i) e -= 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * s.var[i]);
    return e;
}

/// int |grad rho|^2 / rho dx.
inline double fisher(const GaussianState& s) { return (1.0 / s.var.array()).sum(); }

/// ||rho||_p.
inline double lp_norm(const GaussianState& s, double p) {
    double v = 1.0;
    for (int i = 0; i < s.dim(); ++i)
        v *= std::pow(2.0 * std::numbers::pi * s.var[i], -(p - 1.0) / (2.0 * p)) * std::pow(p, -1.0 / (2.0 * p));
    return v;
}

/// E|X|^{2s} for X ~ N(0, v I_d).
inline double even_moment(int d, double s, double v = 1.0) {
    return std::pow(2.0 * v, s) * std::exp(std::lgamma(s + 0.5 * d) - std::lgamma(0.5 * d));
}

/// gamma(s) = (int |x|^{2s} g dx)^{2/s} for the standard Gaussian g.
inline double gamma_s(int d, double s) { return std::pow(even_moment(d, s), 2.0 / s); }

/// int_0^tau fisher(heat(sigma0_sq, t)) dt for a = 1/2.
inline double heat_fisher_integral(double sigma0_sq, double tau, int d = 1) {
    return d * std::log1p(tau / sigma0_sq);
}

/// E[Lambda(|X|)^k] for X ~ N(0, v I_d), Lambda = ln max(r,1) or ln(1+r), by
/// exp-sinh quadrature on the radial density.
inline double log_moment(int d, double v, int k, bool one_plus = false) {
    const double c = 2.0 / (std::pow(2.0 * v, 0.5 * d) * std::tgamma(0.5 * d));
    auto radial = [=](double r) { return c * std::pow(r, d - 1) * std::exp(-r * r / (2.0 * v)); };
    boost::math::quadrature::exp_sinh<double> integrator;
    if (one_plus)
        return integrator.integrate([&](double r) { return std::pow(std::log1p(r), k) * radial(r); });
    // ln max(r,1) vanishes on [0,1]; substitute r = 1 + u.
    return integrator.integrate([&](double u) { return std::pow(std::log1p(u), k) * radial(1.0 + u); });
}

/// Samples a Gaussian-valued trajectory on every level of the grid.
template <class StateAt>
Field sample(const SpaceTimeGrid& g, StateAt&& state_at) {
    Field f(g);
    const auto& sp = g.space;
    std::vector<Vec> pts(sp.size());
    for (std::size_t c = 0; c < sp.size(); ++c) pts[c] = sp.point(c);
    for (int k = 0; k < g.slices(); ++k) {
        const GaussianState st = state_at(g.time(k));
        auto s = f.slice(k);
        for (std::size_t c = 0; c < sp.size(); ++c) s[c] = st.density(pts[c]);
    }
    return f;
}

}  // namespace fpb::oracle
