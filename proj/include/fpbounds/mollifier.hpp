#pragma once

// Gaussian mollification of density slices and the convolution inequality.

#include "fpbounds/grid.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace fpb {

struct MollifierSpec {
    double epsilon = 0.1;
    double truncation = 8.0;  ///< kernel radius in units of epsilon
};

struct Mollified {
    std::vector<double> values;
    double leakage = 0.0;  ///< mass lost through zero extension beyond the box
};

namespace detail {

inline std::vector<double> gaussian_kernel_1d(double h, const MollifierSpec& spec) {
    const int half = static_cast<int>(std::floor(spec.truncation * spec.epsilon / h));
    std::vector<double> k(2 * half + 1);
    double s = 0.0;
    for (int j = -half; j <= half; ++j) {
        const double z = j * h / spec.epsilon;
        k[j + half] = std::exp(-0.5 * z * z);
        s += k[j + half];
    }
    for (double& v : k) v /= s;  // unit discrete mass: sum * h * (1/h)
    return k;
}

}  // namespace detail

/// rho * w_eps with w_eps(x) = eps^{-d} g(x / eps), g the standard Gaussian.
/// Separable convolution, zero extension outside the box.
inline Mollified mollify(const SpatialGrid& g, std::span<const double> rho, const MollifierSpec& spec) {
    if (!(spec.epsilon > 0.0)) throw std::invalid_argument("mollify: epsilon must be positive");
    double hmax = 0.0;
    for (int a = 0; a < g.dim; ++a) hmax = std::max(hmax, g.h(a));
    if (spec.epsilon < 2.0 * hmax) throw RefusedError("mollify: epsilon below two cell widths");
    std::vector<double> cur(rho.begin(), rho.end()), next(rho.size());
    for (int a = 0; a < g.dim; ++a) {
        const auto k = detail::gaussian_kernel_1d(g.h(a), spec);
        const int half = static_cast<int>(k.size() / 2);
        const std::size_t st = g.stride(a);
        const int na = g.n[a];
        for (std::size_t c = 0; c < cur.size(); ++c) {
            const int i = static_cast<int>((c / st) % static_cast<std::size_t>(na));
            const std::size_t base = c - static_cast<std::size_t>(i) * st;
            double s = 0.0;
            const int jlo = std::max(-half, -i), jhi = std::min(half, na - 1 - i);
            for (int j = jlo; j <= jhi; ++j) s += k[j + half] * cur[base + static_cast<std::size_t>(i + j) * st];
            next[c] = s;
        }
        std::swap(cur, next);
    }
    Mollified out;
    out.leakage = g.integrate(rho) - g.integrate(cur);
    out.values = std::move(cur);
    return out;
}

/// f_eps = rho_eps + eps max(1, |x|)^{-d-1}.
inline std::vector<double> f_epsilon(const SpatialGrid& g, std::span<const double> rho, const MollifierSpec& spec) {
    auto m = mollify(g, rho, spec);
    for (std::size_t c = 0; c < g.size(); ++c) {
        const double r = std::max(1.0, g.point(c).norm());
        m.values[c] += spec.epsilon * std::pow(r, -g.dim - 1);
    }
    return std::move(m.values);
}

struct ConvolutionGap {
    double lhs = 0.0;
    double rhs = 0.0;
    [[nodiscard]] double gap() const { return rhs - lhs; }
};

/// Both sides of
///   int |(psi f1) * f2|^2 / (f1 * f2) dx <= int |psi|^2 f1 dx * int f2 dx
/// with the quotient set to 0 where f1 * f2 vanishes. The convolution is the full
/// discrete linear convolution on the grid spacing (output 2n-1 cells per axis).
inline ConvolutionGap convolution_inequality_gap(const SpatialGrid& g, std::span<const double> f1,
                                                 std::span<const double> f2, std::span<const double> psi) {
    const std::size_t n = g.size();
    if (f1.size() != n || f2.size() != n || psi.size() != n)
        throw std::invalid_argument("convolution_inequality_gap: size mismatch");
    std::array<int, kMaxDim> m{1, 1, 1};
    std::size_t total = 1;
    for (int a = 0; a < g.dim; ++a) {
        m[a] = 2 * g.n[a] - 1;
        total *= static_cast<std::size_t>(m[a]);
    }
    std::vector<double> conv(total, 0.0), conv_psi(total, 0.0);
    const double vol = g.cell_volume();
    for (std::size_t i = 0; i < n; ++i) {
        if (f1[i] == 0.0) continue;
        const auto ii = g.unravel(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (f2[j] == 0.0) continue;
            const auto jj = g.unravel(j);
            std::size_t o = 0;
            for (int a = g.dim - 1; a >= 0; --a) o = o * static_cast<std::size_t>(m[a]) + ii[a] + jj[a];
            const double w = f1[i] * f2[j] * vol;
            conv[o] += w;
            conv_psi[o] += psi[i] * w;
        }
    }
    ConvolutionGap r;
    for (std::size_t o = 0; o < total; ++o)
        if (conv[o] > 0.0) r.lhs += conv_psi[o] * conv_psi[o] / conv[o];
    r.lhs *= vol;
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a += psi[i] * psi[i] * f1[i];
        b += f2[i];
    }
    r.rhs = a * vol * b * vol;
    return r;
}

}  // namespace fpb
