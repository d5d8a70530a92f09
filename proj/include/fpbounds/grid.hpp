#pragma once

#include "fpbounds/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpb {

/// Cell-centered tensor grid on the box prod_i [lo_i, hi_i].
/// Values live at cell centers and stand for cell averages.
struct SpatialGrid {
    int dim = 1;
    std::array<double, kMaxDim> lo{0.0, 0.0, 0.0};
    std::array<double, kMaxDim> hi{1.0, 1.0, 1.0};
    std::array<int, kMaxDim> n{1, 1, 1};

    SpatialGrid() = default;

    SpatialGrid(int d, std::array<double, kMaxDim> lower, std::array<double, kMaxDim> upper,
                std::array<int, kMaxDim> cells)
        : dim(d), lo(lower), hi(upper), n(cells) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("grid: dimension must be 1..3");
        for (int a = dim; a < kMaxDim; ++a) {
            lo[a] = 0.0;
            hi[a] = 1.0;
            n[a] = 1;
        }
        for (int a = 0; a < dim; ++a) {
            if (n[a] < 4) throw std::invalid_argument("grid: every axis needs at least 4 cells");
            if (!(hi[a] > lo[a])) throw std::invalid_argument("grid: empty box along an axis");
        }
    }

    /// Symmetric box [-R, R]^d with N cells per axis.
    static SpatialGrid symmetric(int d, double half_width, int cells) {
        return SpatialGrid(d, {-half_width, -half_width, -half_width},
                           {half_width, half_width, half_width}, {cells, cells, cells});
    }

    [[nodiscard]] double h(int axis) const { return (hi[axis] - lo[axis]) / n[axis]; }

    [[nodiscard]] double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim; ++a) v *= h(a);
        return v;
    }

    [[nodiscard]] double box_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim; ++a) v *= hi[a] - lo[a];
        return v;
    }

    [[nodiscard]] std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n[a]);
        return s;
    }

    /// Flat-index stride of an axis (axis 0 varies fastest).
    [[nodiscard]] std::size_t stride(int axis) const {
        std::size_t s = 1;
        for (int a = 0; a < axis; ++a) s *= static_cast<std::size_t>(n[a]);
        return s;
    }

    [[nodiscard]] double center(int axis, int i) const { return lo[axis] + (i + 0.5) * h(axis); }

    [[nodiscard]] std::array<int, kMaxDim> unravel(std::size_t flat) const {
        std::array<int, kMaxDim> idx{0, 0, 0};
        for (int a = 0; a < dim; ++a) {
            idx[a] = static_cast<int>(flat % static_cast<std::size_t>(n[a]));
            flat /= static_cast<std::size_t>(n[a]);
        }
        return idx;
    }

    [[nodiscard]] std::size_t ravel(const std::array<int, kMaxDim>& idx) const {
        std::size_t flat = 0;
        for (int a = dim - 1; a >= 0; --a) flat = flat * static_cast<std::size_t>(n[a]) + idx[a];
        return flat;
    }

    [[nodiscard]] Vec point(std::size_t flat) const {
        const auto idx = unravel(flat);
        Vec x(dim);
        for (int a = 0; a < dim; ++a) x[a] = center(a, idx[a]);
        return x;
    }

    [[nodiscard]] bool contains(const Vec& x) const {
        for (int a = 0; a < dim; ++a)
            if (x[a] < lo[a] || x[a] > hi[a]) return false;
        return true;
    }

    /// Largest distance from the origin to a box corner.
    [[nodiscard]] double corner_radius() const {
        double r2 = 0.0;
        for (int a = 0; a < dim; ++a) {
            const double m = std::max(std::abs(lo[a]), std::abs(hi[a]));
            r2 += m * m;
        }
        return std::sqrt(r2);
    }

    [[nodiscard]] bool can_coarsen() const {
        for (int a = 0; a < dim; ++a)
            if (n[a] % 2 != 0 || n[a] < 8) return false;
        return true;
    }

    /// Same box with half the cells per axis.
    [[nodiscard]] SpatialGrid coarsened() const {
        std::array<int, kMaxDim> half{1, 1, 1};
        for (int a = 0; a < dim; ++a) half[a] = n[a] / 2;
        return SpatialGrid(dim, lo, hi, half);
    }

    /// Average groups of 2^d cells onto the coarsened grid (preserves mass).
    [[nodiscard]] std::vector<double> coarsen(std::span<const double> values) const {
        const SpatialGrid coarse = coarsened();
        std::vector<double> out(coarse.size(), 0.0);
        const double w = 1.0 / static_cast<double>(1 << dim);
        for (std::size_t f = 0; f < size(); ++f) {
            auto idx = unravel(f);
            for (int a = 0; a < dim; ++a) idx[a] /= 2;
            out[coarse.ravel(idx)] += w * values[f];
        }
        return out;
    }

    /// Midpoint-rule integral of cell values over the box.
    [[nodiscard]] double integrate(std::span<const double> values) const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * cell_volume();
    }

    friend bool operator==(const SpatialGrid& a, const SpatialGrid& b) {
        return a.dim == b.dim && a.lo == b.lo && a.hi == b.hi && a.n == b.n;
    }
};

/// Spatial grid plus the uniform time levels t_k = k * dt, k = 0..steps.
struct SpaceTimeGrid {
    SpatialGrid space;
    double dt = 1.0;
    int steps = 0;

    SpaceTimeGrid() = default;

    SpaceTimeGrid(SpatialGrid s, double step, int nsteps) : space(std::move(s)), dt(step), steps(nsteps) {
        if (!(dt > 0.0)) throw std::invalid_argument("grid: time step must be positive");
        if (steps < 0) throw std::invalid_argument("grid: negative step count");
        if (horizon() > 1.0 + 1e-12) throw std::invalid_argument("grid: time horizon exceeds 1");
    }

    /// Grid reaching `horizon` with step `dt` (horizon rounded to a whole number of steps).
    static SpaceTimeGrid until(SpatialGrid s, double step, double horizon) {
        const int nsteps = static_cast<int>(std::lround(horizon / step));
        return SpaceTimeGrid(std::move(s), step, nsteps);
    }

    [[nodiscard]] int slices() const { return steps + 1; }
    [[nodiscard]] double time(int k) const { return k * dt; }
    [[nodiscard]] double horizon() const { return steps * dt; }
};

/// Scalar field sampled on a space-time grid; slice k holds the values at t_k.
class Field {
public:
    Field() = default;

    explicit Field(SpaceTimeGrid grid)
        : grid_(std::move(grid)), data_(grid_.space.size() * grid_.slices(), 0.0) {}

    Field(SpaceTimeGrid grid, std::vector<double> data) : grid_(std::move(grid)), data_(std::move(data)) {
        if (data_.size() != grid_.space.size() * grid_.slices())
            throw std::invalid_argument("field: data size does not match grid");
    }

    /// Samples f(t, x) at every cell center and time level.
    static Field sample(const SpaceTimeGrid& grid, const std::function<double(double, const Vec&)>& f) {
        Field out(grid);
        const auto& sp = grid.space;
        std::vector<Vec> pts(sp.size());
        for (std::size_t c = 0; c < sp.size(); ++c) pts[c] = sp.point(c);
        for (int k = 0; k < grid.slices(); ++k) {
            auto s = out.slice(k);
            const double t = grid.time(k);
            for (std::size_t c = 0; c < sp.size(); ++c) s[c] = f(t, pts[c]);
        }
        return out;
    }

    /// Single-slice field (steps = 0) from a spatial function.
    static Field single(const SpatialGrid& space, const std::function<double(const Vec&)>& f) {
        return sample(SpaceTimeGrid(space, 1.0, 0), [&](double, const Vec& x) { return f(x); });
    }

    [[nodiscard]] const SpaceTimeGrid& grid() const { return grid_; }
    [[nodiscard]] const SpatialGrid& space() const { return grid_.space; }
    [[nodiscard]] int slices() const { return grid_.slices(); }

    [[nodiscard]] std::span<double> slice(int k) {
        const std::size_t n = grid_.space.size();
        return {data_.data() + static_cast<std::size_t>(k) * n, n};
    }
    [[nodiscard]] std::span<const double> slice(int k) const {
        const std::size_t n = grid_.space.size();
        return {data_.data() + static_cast<std::size_t>(k) * n, n};
    }

    [[nodiscard]] const std::vector<double>& data() const { return data_; }
    [[nodiscard]] std::vector<double>& data() { return data_; }

    [[nodiscard]] double mass(int k) const { return grid_.space.integrate(slice(k)); }

    /// Slice at an arbitrary time in [0, horizon], linear in t between levels.
    [[nodiscard]] std::vector<double> slice_at(double t) const {
        if (t < -1e-12 || t > grid_.horizon() + 1e-12)
            throw std::range_error("field: time outside grid horizon");
        const double pos = std::clamp(t / grid_.dt, 0.0, static_cast<double>(grid_.steps));
        const int k0 = std::min(static_cast<int>(std::floor(pos)), grid_.steps);
        const double w = pos - k0;
        auto a = slice(k0);
        std::vector<double> out(a.begin(), a.end());
        if (w > 1e-12 && k0 < grid_.steps) {
            auto b = slice(k0 + 1);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * a[i] + w * b[i];
        }
        return out;
    }

    /// Field on the coarsened spatial grid and every other time level.
    [[nodiscard]] Field coarsened() const {
        const bool time_ok = grid_.steps % 2 == 0;
        const int tstride = time_ok && grid_.steps > 0 ? 2 : 1;
        SpaceTimeGrid g(grid_.space.coarsened(), grid_.dt * tstride, grid_.steps / tstride);
        Field out(g);
        for (int k = 0; k < g.slices(); ++k) {
            auto c = grid_.space.coarsen(slice(k * tstride));
            std::copy(c.begin(), c.end(), out.slice(k).begin());
        }
        return out;
    }

    [[nodiscard]] bool can_coarsen() const {
        return grid_.space.can_coarsen() && (grid_.steps == 0 || grid_.steps % 2 == 0);
    }

    Field& operator*=(double c) {
        for (double& v : data_) v *= c;
        return *this;
    }

private:
    SpaceTimeGrid grid_;
    std::vector<double> data_;
};

/// Trapezoid weights for integrating a piecewise-linear function of t over [0, tau]
/// sampled at the grid levels. Levels beyond tau get weight 0.
inline std::vector<double> time_weights(const SpaceTimeGrid& g, double tau) {
    if (tau < -1e-12 || tau > g.horizon() + 1e-9 * std::max(1.0, g.horizon()))
        throw std::range_error("time horizon tau beyond grid");
    std::vector<double> w(g.slices(), 0.0);
    if (g.steps == 0) return w;
    const double pos = std::clamp(tau / g.dt, 0.0, static_cast<double>(g.steps));
    const int full = static_cast<int>(std::floor(pos + 1e-9));
    for (int k = 0; k < std::min(full, g.steps); ++k) {
        w[k] += 0.5 * g.dt;
        w[k + 1] += 0.5 * g.dt;
    }
    const double frac = pos - full;
    if (full < g.steps && frac > 1e-9) {
        // partial interval [t_full, tau] of the linear interpolant
        const double len = frac * g.dt;
        w[full] += len * (1.0 - 0.5 * frac);
        w[full + 1] += len * 0.5 * frac;
    }
    return w;
}

/// Indices of time levels with t_k <= tau.
inline int last_level_within(const SpaceTimeGrid& g, double tau) {
    return std::min(g.steps, static_cast<int>(std::floor(tau / g.dt + 1e-9)));
}

}  // namespace fpb
