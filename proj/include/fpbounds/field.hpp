#pragma once

// Functionals of densities on the grid: mixed norms, entropy, Fisher
// information, log-moments, Sobolev-type norms, and field serialization.

#include "fpbounds/coeff.hpp"
#include "fpbounds/grid.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace fpb {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Value with a quadrature error estimate.
struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

/// Evaluates `fn` on the field and on its coarsened copy; error = |F_h - F_2h| / 3.
/// Without a coarsenable field the error is reported as 0.
template <class Fn>
Estimate with_error(const Field& f, Fn&& fn) {
    Estimate e{fn(f), 0.0};
    if (f.can_coarsen()) e.error = std::abs(e.value - fn(f.coarsened())) / 3.0;
    return e;
}

/// Mixed Lebesgue exponent pair and horizon; q = kInf selects the sup in time.
struct NormSpec {
    double p = 2.0;
    double q = 2.0;
    double tau = 1.0;
};

namespace detail {

// Integrates g(k) over [0, tau]. Single-slice fields count as constant in time.
template <class G>
double time_integral(const SpaceTimeGrid& g, double tau, G&& slice_value) {
    if (g.steps == 0) {
        if (tau < 0.0 || tau > 1.0 + 1e-12) throw std::range_error("time horizon tau outside [0,1]");
        return tau * slice_value(0);
    }
    const auto w = time_weights(g, tau);
    double s = 0.0;
    for (int k = 0; k < g.slices(); ++k)
        if (w[k] != 0.0) s += w[k] * slice_value(k);
    return s;
}

inline double slice_lp(const SpatialGrid& g, std::span<const double> v, double p) {
    double s = 0.0;
    for (double x : v) s += std::pow(std::abs(x), p);
    return std::pow(s * g.cell_volume(), 1.0 / p);
}

inline void check_tau(const SpaceTimeGrid& g, double tau) {
    if (g.steps > 0 && (tau < -1e-12 || tau > g.horizon() + 1e-9 * std::max(1.0, g.horizon())))
        throw std::range_error("time horizon tau beyond grid");
}

}  // namespace detail

/// (int_0^tau (int |f|^p dx)^{q/p} dt)^{1/q}; q = kInf gives the max over slices up to tau.
inline double mixed_norm(const Field& f, const NormSpec& spec) {
    if (!(spec.p >= 1.0) || !(spec.q >= 1.0)) throw std::invalid_argument("mixed_norm: exponents must be >= 1");
    const auto& g = f.grid();
    detail::check_tau(g, spec.tau);
    if (std::isinf(spec.q)) {
        double m = 0.0;
        const int last = g.steps == 0 ? 0 : last_level_within(g, spec.tau);
        for (int k = 0; k <= last; ++k) m = std::max(m, detail::slice_lp(g.space, f.slice(k), spec.p));
        if (g.steps > 0 && spec.tau > g.time(last) + 1e-12)
            m = std::max(m, detail::slice_lp(g.space, f.slice_at(spec.tau), spec.p));
        return m;
    }
    const double integral = detail::time_integral(
        g, spec.tau, [&](int k) { return std::pow(detail::slice_lp(g.space, f.slice(k), spec.p), spec.q); });
    return std::pow(integral, 1.0 / spec.q);
}

/// int rho ln rho dx with 0 ln 0 = 0.
inline double entropy(const SpatialGrid& g, std::span<const double> rho) {
    double s = 0.0;
    for (double r : rho)
        if (r > 0.0) s += r * std::log(r);
    return s * g.cell_volume();
}

/// Centered second-order gradient, one-sided second-order at the faces.
/// Result is laid out axis-major: grad[a * size + cell].
inline std::vector<double> gradient(const SpatialGrid& g, std::span<const double> f) {
    const std::size_t n = g.size();
    std::vector<double> out(static_cast<std::size_t>(g.dim) * n, 0.0);
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        const double h = g.h(a);
        const int na = g.n[a];
        for (std::size_t c = 0; c < n; ++c) {
            const int i = static_cast<int>((c / st) % static_cast<std::size_t>(na));
            double d;
            if (i == 0)
                d = (-3.0 * f[c] + 4.0 * f[c + st] - f[c + 2 * st]) / (2.0 * h);
            else if (i == na - 1)
                d = (3.0 * f[c] - 4.0 * f[c - st] + f[c - 2 * st]) / (2.0 * h);
            else
                d = (f[c + st] - f[c - st]) / (2.0 * h);
            out[static_cast<std::size_t>(a) * n + c] = d;
        }
    }
    return out;
}

/// Cells below floor_rel * max(rho) contribute nothing to Fisher-type integrands.
inline constexpr double kDensityFloorRel = 1e-12;

inline double density_floor(std::span<const double> rho) {
    double m = 0.0;
    for (double r : rho) m = std::max(m, r);
    return kDensityFloorRel * m;
}

/// int |grad rho|^2 / rho dx.
inline double fisher(const SpatialGrid& g, std::span<const double> rho) {
    const auto grad = gradient(g, rho);
    const double floor = density_floor(rho);
    const std::size_t n = g.size();
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        if (rho[c] <= floor) continue;
        double g2 = 0.0;
        for (int a = 0; a < g.dim; ++a) g2 += grad[a * n + c] * grad[a * n + c];
        s += g2 / rho[c];
    }
    return s * g.cell_volume();
}

inline double fisher_time_integral(const Field& rho, double tau) {
    detail::check_tau(rho.grid(), tau);
    return detail::time_integral(rho.grid(), tau, [&](int k) { return fisher(rho.space(), rho.slice(k)); });
}

/// int_0^tau int <A grad rho, grad rho> / rho dx dt.
inline double weighted_fisher(const Field& rho, const CoefficientField& c, double tau) {
    const auto& g = rho.grid();
    detail::check_tau(g, tau);
    const auto& sp = g.space;
    const std::size_t n = sp.size();
    std::vector<Vec> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = sp.point(i);
    return detail::time_integral(g, tau, [&](int k) {
        const auto s = rho.slice(k);
        const auto grad = gradient(sp, s);
        const double floor = density_floor(s);
        const double t = g.time(k);
        double acc = 0.0;
        Vec v(sp.dim);
        for (std::size_t i = 0; i < n; ++i) {
            const Mat a = c.A(t, pts[i]);
            if (!(min_eigenvalue(a) > 0.0))
                throw std::domain_error("weighted_fisher: A not positive definite at cell " + std::to_string(i));
            if (s[i] <= floor) continue;
            for (int ax = 0; ax < sp.dim; ++ax) v[ax] = grad[ax * n + i];
            acc += v.dot(a * v) / s[i];
        }
        return acc * sp.cell_volume();
    });
}

enum class LogWeight {
    max_one,  ///< ln max(|x|, 1)
    one_plus  ///< ln(1 + |x|)
};

/// int Lambda(x)^k rho dx, k in {1, 2, 4}.
inline double log_moment(const SpatialGrid& g, std::span<const double> rho, int k,
                         LogWeight w = LogWeight::max_one) {
    if (k != 1 && k != 2 && k != 4) throw std::invalid_argument("log_moment: power must be 1, 2 or 4");
    double s = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
        const double r = g.point(c).norm();
        const double lam = w == LogWeight::max_one ? std::log(std::max(r, 1.0)) : std::log1p(r);
        s += std::pow(lam, k) * rho[c];
    }
    return s * g.cell_volume();
}

/// ||f(t)||_{W^{p,1}} = ||f||_p + || |grad f| ||_p.
inline double w1p_norm(const SpatialGrid& g, std::span<const double> f, double p) {
    const auto grad = gradient(g, f);
    const std::size_t n = g.size();
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        double g2 = 0.0;
        for (int a = 0; a < g.dim; ++a) g2 += grad[a * n + c] * grad[a * n + c];
        s += std::pow(g2, 0.5 * p);
    }
    return detail::slice_lp(g, f, p) + std::pow(s * g.cell_volume(), 1.0 / p);
}

/// Single-slice random field: `modes` cosines with wave numbers up to `modes` per
/// axis times a Gaussian envelope of width a quarter of the box.
inline Field random_band_limited(const SpatialGrid& g, int modes, std::mt19937_64& rng) {
    if (modes < 1) throw std::invalid_argument("random_band_limited: need at least one mode");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<int> wave(0, modes);
    std::vector<Vec> k(modes);
    std::vector<double> amp(modes), phase(modes);
    double width = kInf;
    for (int a = 0; a < g.dim; ++a) width = std::min(width, 0.25 * (g.hi[a] - g.lo[a]));
    for (int m = 0; m < modes; ++m) {
        k[m] = Vec(g.dim);
        for (int a = 0; a < g.dim; ++a) k[m][a] = wave(rng) * 2.0 * std::numbers::pi / (g.hi[a] - g.lo[a]);
        amp[m] = unit(rng);
        phase[m] = std::numbers::pi * unit(rng);
    }
    return Field::single(g, [&](const Vec& x) {
        double s = 0.0;
        for (int m = 0; m < modes; ++m) s += amp[m] * std::cos(k[m].dot(x) + phase[m]);
        return s * std::exp(-0.5 * x.squaredNorm() / (width * width));
    });
}

/// (int_0^tau ||f(t)||_{W^{p,1}}^q dt)^{1/q}.
inline double h_pq_norm(const Field& f, double p, double q, double tau) {
    if (!(p >= 1.0) || !(q >= 1.0)) throw std::invalid_argument("h_pq_norm: exponents must be >= 1");
    detail::check_tau(f.grid(), tau);
    const double integral =
        detail::time_integral(f.grid(), tau, [&](int k) { return std::pow(w1p_norm(f.space(), f.slice(k), p), q); });
    return std::pow(integral, 1.0 / q);
}

/// Mass in cells whose center lies within `frac` of the half-width from some face.
inline double boundary_mass(const SpatialGrid& g, std::span<const double> rho, double frac = 0.1) {
    double s = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
        const auto idx = g.unravel(c);
        bool near = false;
        for (int a = 0; a < g.dim && !near; ++a) {
            const double x = g.center(a, idx[a]);
            const double band = frac * 0.5 * (g.hi[a] - g.lo[a]);
            near = x - g.lo[a] < band || g.hi[a] - x < band;
        }
        if (near) s += std::abs(rho[c]);
    }
    return s * g.cell_volume();
}

inline double max_boundary_mass(const Field& f, double frac = 0.1) {
    double m = 0.0;
    for (int k = 0; k < f.slices(); ++k) m = std::max(m, boundary_mass(f.space(), f.slice(k), frac));
    return m;
}

// ---------------------------------------------------------------------------
// Serialization

/// CSV table: header `k,t,cell,x0[,x1[,x2]],value`, one row per (k, cell).
inline void write_csv(const Field& f, std::ostream& os) {
    const auto& g = f.grid();
    os << "k,t,cell";
    for (int a = 0; a < g.space.dim; ++a) os << ",x" << a;
    os << ",value\n";
    os << std::setprecision(17);
    for (int k = 0; k < g.slices(); ++k) {
        const auto s = f.slice(k);
        for (std::size_t c = 0; c < g.space.size(); ++c) {
            os << k << ',' << g.time(k) << ',' << c;
            const Vec x = g.space.point(c);
            for (int a = 0; a < g.space.dim; ++a) os << ',' << x[a];
            os << ',' << s[c] << '\n';
        }
    }
}

/// Reads the CSV table back; the grid is recovered from the cell centers and times.
inline Field read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("field csv: empty input");
    int dim = 0;
    {
        std::stringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ','))
            if (!col.empty() && col[0] == 'x') ++dim;
    }
    if (dim < 1 || dim > kMaxDim) throw std::runtime_error("field csv: bad header");
    struct Row {
        int k;
        double t;
        std::size_t cell;
        std::array<double, kMaxDim> x;
        double v;
    };
    std::vector<Row> rows;
    std::array<std::set<double>, kMaxDim> centers;
    std::map<int, double> times;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != 4 + dim) throw std::runtime_error("field csv: wrong column count");
        Row r{static_cast<int>(vals[0]), vals[1], static_cast<std::size_t>(vals[2]), {0, 0, 0}, vals.back()};
        for (int a = 0; a < dim; ++a) {
            r.x[a] = vals[3 + a];
            centers[a].insert(r.x[a]);
        }
        times[r.k] = r.t;
        rows.push_back(r);
    }
    std::array<double, kMaxDim> lo{}, hi{};
    std::array<int, kMaxDim> n{1, 1, 1};
    for (int a = 0; a < dim; ++a) {
        n[a] = static_cast<int>(centers[a].size());
        if (n[a] < 2) throw std::runtime_error("field csv: too few cells");
        const double h = (*centers[a].rbegin() - *centers[a].begin()) / (n[a] - 1);
        lo[a] = *centers[a].begin() - 0.5 * h;
        hi[a] = *centers[a].rbegin() + 0.5 * h;
    }
    const int steps = static_cast<int>(times.size()) - 1;
    const double dt = steps > 0 ? times.rbegin()->second / steps : 1.0;
    Field f(SpaceTimeGrid(SpatialGrid(dim, lo, hi, n), dt, steps));
    if (rows.size() != f.data().size()) throw std::runtime_error("field csv: row count does not match grid");
    for (const auto& r : rows) f.slice(r.k)[r.cell] = r.v;
    return f;
}

// Binary dump, little-endian:
//   char[4] "FPBD", u32 version (1), i32 dim, i32 n[3], f64 lo[3], f64 hi[3],
//   f64 dt, i32 steps, then (steps+1) * prod(n) f64 values, slice-major.
static_assert(std::endian::native == std::endian::little, "binary field format assumes a little-endian host");

namespace detail {
template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("field binary: truncated input");
    return v;
}
}  // namespace detail

inline void write_binary(const Field& f, std::ostream& os) {
    const auto& g = f.grid();
    os.write("FPBD", 4);
    detail::put<std::uint32_t>(os, 1);
    detail::put<std::int32_t>(os, g.space.dim);
    for (int a = 0; a < kMaxDim; ++a) detail::put<std::int32_t>(os, g.space.n[a]);
    for (int a = 0; a < kMaxDim; ++a) detail::put<double>(os, g.space.lo[a]);
    for (int a = 0; a < kMaxDim; ++a) detail::put<double>(os, g.space.hi[a]);
    detail::put<double>(os, g.dt);
    detail::put<std::int32_t>(os, g.steps);
    os.write(reinterpret_cast<const char*>(f.data().data()),
             static_cast<std::streamsize>(f.data().size() * sizeof(double)));
}

inline Field read_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FPBD", 4) != 0) throw std::runtime_error("field binary: bad magic");
    if (detail::get<std::uint32_t>(is) != 1) throw std::runtime_error("field binary: unsupported version");
    const int dim = detail::get<std::int32_t>(is);
    std::array<int, kMaxDim> n{};
    std::array<double, kMaxDim> lo{}, hi{};
    for (int a = 0; a < kMaxDim; ++a) n[a] = detail::get<std::int32_t>(is);
    for (int a = 0; a < kMaxDim; ++a) lo[a] = detail::get<double>(is);
    for (int a = 0; a < kMaxDim; ++a) hi[a] = detail::get<double>(is);
    const double dt = detail::get<double>(is);
    const int steps = detail::get<std::int32_t>(is);
    Field f(SpaceTimeGrid(SpatialGrid(dim, lo, hi, n), dt, steps));
    is.read(reinterpret_cast<char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(double)));
    if (!is) throw std::runtime_error("field binary: truncated data");
    return f;
}

}  // namespace fpb
