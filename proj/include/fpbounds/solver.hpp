#pragma once

// Finite-volume solver for d_t rho = d_i d_j (a^{ij} rho) - d_i (b^i rho) on a box
// with zero-flux faces, and residual checks of the weak equation.

#include "fpbounds/coeff.hpp"
#include "fpbounds/field.hpp"
#include "fpbounds/grid.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <span>
#include <vector>

namespace fpb {

enum class Scheme { explicit_euler, crank_nicolson };
enum class Positivity { clip_renormalize, off };

struct SolverConfig {
    Scheme scheme = Scheme::crank_nicolson;
    double theta = 0.5;  ///< implicit weight; ignored by the explicit scheme
    Positivity positivity = Positivity::clip_renormalize;
    double cfl_safety = 0.9;
    double linear_tolerance = 1e-10;
    int max_iterations = 10000;
    double max_clipped_mass = 1e-6;  ///< per step
    int store_every = 1;             ///< keep every n-th time level in the output field
    bool require_unit_mass = true;
    std::ostream* diagnostics = nullptr;  ///< CSV: step,t,mass,min_density,clipped_mass
};

/// Spatial Fokker-Planck operator frozen at one time.
///
/// Diagonal part (per axis, tridiagonal) acts on rho through
///   (K rho)_c = sum_a west_a[c] rho_{c-e_a} + diag[c] rho_c + east_a[c] rho_{c+e_a},
/// cross terms d_i d_j (a^{ij} rho), i != j, are applied separately.
class FluxOperator {
public:
    FluxOperator(const CoefficientField& c, const SpatialGrid& g, double t) : g_(g) {
        if (c.dim() != g.dim) throw std::invalid_argument("solver: coefficient and grid dimensions differ");
        const std::size_t n = g.size();
        diag_.assign(n, 0.0);
        for (int a = 0; a < g.dim; ++a) {
            west_[a].assign(n, 0.0);
            east_[a].assign(n, 0.0);
        }
        std::vector<Mat> amat(n);
        for (std::size_t i = 0; i < n; ++i) amat[i] = c.A(t, g.point(i));
        for (int ax = 0; ax < g.dim; ++ax) {
            const std::size_t st = g.stride(ax);
            const double h = g.h(ax);
            const int na = g.n[ax];
            for (std::size_t i = 0; i < n; ++i) {
                const int idx = static_cast<int>((i / st) % static_cast<std::size_t>(na));
                if (idx + 1 >= na) continue;
                // face between i and i + e_ax
                Vec xf = g.point(i);
                xf[ax] += 0.5 * h;
                const double bf = c.b(t, xf)[ax];
                const std::size_t j = i + st;
                const double ai = amat[i](ax, ax), aj = amat[j](ax, ax);
                // flux G = ((a rho)_j - (a rho)_i) / h - bf (rho_i + rho_j) / 2
                // contributes +G/h to cell i and -G/h to cell j
                east_[ax][i] += aj / (h * h) - bf / (2.0 * h);
                diag_[i] += -ai / (h * h) - bf / (2.0 * h);
                west_[ax][j] += ai / (h * h) + bf / (2.0 * h);
                diag_[j] += -aj / (h * h) + bf / (2.0 * h);
            }
        }
        for (int i = 0; i < g.dim; ++i)
            for (int j = i + 1; j < g.dim; ++j) {
                std::vector<double> v(n);
                bool nonzero = false;
                for (std::size_t k = 0; k < n; ++k) {
                    v[k] = amat[k](i, j);
                    nonzero = nonzero || v[k] != 0.0;
                }
                if (nonzero) cross_.push_back({i, j, std::move(v)});
            }
    }

    [[nodiscard]] const SpatialGrid& grid() const { return g_; }
    [[nodiscard]] bool has_cross() const { return !cross_.empty(); }
    [[nodiscard]] const std::vector<double>& diag() const { return diag_; }
    [[nodiscard]] const std::vector<double>& west(int a) const { return west_[a]; }
    [[nodiscard]] const std::vector<double>& east(int a) const { return east_[a]; }

    [[nodiscard]] double max_abs_diag() const {
        double m = 0.0;
        for (double v : diag_) m = std::max(m, std::abs(v));
        return m;
    }

    /// out = K_diag rho (overwrites).
    void apply_diag(std::span<const double> rho, std::span<double> out) const {
        const std::size_t n = g_.size();
        for (std::size_t i = 0; i < n; ++i) out[i] = diag_[i] * rho[i];
        for (int a = 0; a < g_.dim; ++a) {
            const std::size_t st = g_.stride(a);
            const auto& w = west_[a];
            const auto& e = east_[a];
            for (std::size_t i = 0; i < n; ++i) {
                if (w[i] != 0.0) out[i] += w[i] * rho[i - st];
                if (e[i] != 0.0) out[i] += e[i] * rho[i + st];
            }
        }
    }

    /// out += sum_{i != j} d_i d_j (a^{ij} rho), flux form along axis i with zero-flux faces.
    void add_cross(std::span<const double> rho, std::span<double> out) const {
        const std::size_t n = g_.size();
        std::vector<double> w(n), dj(n);
        for (const auto& term : cross_) {
            for (std::size_t k = 0; k < n; ++k) w[k] = term.a[k] * rho[k];
            for (auto [i, j] : {std::pair{term.i, term.j}, std::pair{term.j, term.i}}) {
                centered_difference(w, j, dj);
                const std::size_t si = g_.stride(i);
                const double hi = g_.h(i);
                for (std::size_t k = 0; k < n; ++k) {
                    const int idx = static_cast<int>((k / si) % static_cast<std::size_t>(g_.n[i]));
                    if (idx + 1 >= g_.n[i]) continue;
                    const double flux = 0.5 * (dj[k] + dj[k + si]);
                    out[k] += flux / hi;
                    out[k + si] -= flux / hi;
                }
            }
        }
    }

    /// Sparse matrix of the diagonal part (used by the iterative solver in d >= 2).
    [[nodiscard]] Eigen::SparseMatrix<double, Eigen::RowMajor> sparse_diag() const {
        const std::size_t n = g_.size();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(n * (1 + 2 * g_.dim));
        for (std::size_t i = 0; i < n; ++i) {
            trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag_[i]);
            for (int a = 0; a < g_.dim; ++a) {
                const std::size_t st = g_.stride(a);
                if (west_[a][i] != 0.0)
                    trip.emplace_back(static_cast<int>(i), static_cast<int>(i - st), west_[a][i]);
                if (east_[a][i] != 0.0)
                    trip.emplace_back(static_cast<int>(i), static_cast<int>(i + st), east_[a][i]);
            }
        }
        Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<int>(n), static_cast<int>(n));
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }

private:
    struct Cross {
        int i, j;
        std::vector<double> a;
    };

    // Centered difference along `axis` with zero extension outside the box.
    void centered_difference(const std::vector<double>& w, int axis, std::vector<double>& out) const {
        const std::size_t st = g_.stride(axis);
        const double h = g_.h(axis);
        const int na = g_.n[axis];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const int idx = static_cast<int>((k / st) % static_cast<std::size_t>(na));
            const double up = idx + 1 < na ? w[k + st] : 0.0;
            const double dn = idx > 0 ? w[k - st] : 0.0;
            out[k] = (up - dn) / (2.0 * h);
        }
    }

    SpatialGrid g_;
    std::vector<double> diag_;
    std::array<std::vector<double>, kMaxDim> west_, east_;
    std::vector<Cross> cross_;
};

/// Discrete generator paired with FluxOperator by summation by parts:
///   L_h u = sum_a [a^{aa} (u_E - 2u_P + u_W)/h^2 + (b_e (u_E - u_P) + b_w (u_P - u_W))/(2h)]
///           + sum_{i != j} a^{ij} D_i D_j u,
/// with zero extension outside the box.
inline std::vector<double> discrete_generator(const CoefficientField& c, const SpatialGrid& g, double t,
                                              std::span<const double> u) {
    const std::size_t n = g.size();
    std::vector<double> out(n, 0.0);
    auto at = [&](std::size_t k, int axis, int off) {
        const std::size_t st = g.stride(axis);
        const int idx = static_cast<int>((k / st) % static_cast<std::size_t>(g.n[axis]));
        const int j = idx + off;
        if (j < 0 || j >= g.n[axis]) return -1L;
        return static_cast<long>(k) + static_cast<long>(off) * static_cast<long>(st);
    };
    auto val = [&](long k) { return k < 0 ? 0.0 : u[static_cast<std::size_t>(k)]; };
    for (std::size_t k = 0; k < n; ++k) {
        const Vec x = g.point(k);
        const Mat a = c.A(t, x);
        double s = 0.0;
        for (int ax = 0; ax < g.dim; ++ax) {
            const double h = g.h(ax);
            const long e = at(k, ax, 1), w = at(k, ax, -1);
            const double ue = val(e), uw = val(w), up = u[k];
            s += a(ax, ax) * (ue - 2.0 * up + uw) / (h * h);
            if (e >= 0) {
                Vec xf = x;
                xf[ax] += 0.5 * h;
                s += c.b(t, xf)[ax] * (ue - up) / (2.0 * h);
            }
            if (w >= 0) {
                Vec xf = x;
                xf[ax] -= 0.5 * h;
                s += c.b(t, xf)[ax] * (up - uw) / (2.0 * h);
            }
        }
        for (int i = 0; i < g.dim; ++i)
            for (int j = 0; j < g.dim; ++j) {
                if (i == j || a(i, j) == 0.0) continue;
                double m = 0.0;
                for (int si : {-1, 1})
                    for (int sj : {-1, 1}) {
                        const long ki = at(k, i, si);
                        if (ki < 0) continue;
                        const long kij = at(static_cast<std::size_t>(ki), j, sj);
                        m += si * sj * val(kij);
                    }
                s += a(i, j) * m / (4.0 * g.h(i) * g.h(j));
            }
        out[k] = s;
    }
    return out;
}

namespace detail {

// Solves (I - c K) x = rhs for tridiagonal K in one dimension (Thomas algorithm).
inline void thomas_solve(const FluxOperator& op, double c, std::span<const double> rhs, std::span<double> x) {
    const std::size_t n = rhs.size();
    std::vector<double> cp(n), dp(n);
    const auto& w = op.west(0);
    const auto& e = op.east(0);
    const auto& d = op.diag();
    double denom = 1.0 - c * d[0];
    cp[0] = -c * e[0] / denom;
    dp[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        const double lower = -c * w[i];
        denom = (1.0 - c * d[i]) - lower * cp[i - 1];
        if (denom == 0.0) throw SolverError("solver: singular tridiagonal system");
        cp[i] = -c * e[i] / denom;
        dp[i] = (rhs[i] - lower * dp[i - 1]) / denom;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
}

}  // namespace detail

/// Time-steps the Fokker-Planck equation from rho0 on `grid`.
/// `observer(k, t, slice)` (optional) sees every computed level, including ones not stored.
inline Field solve_fp(const CoefficientField& c, std::span<const double> rho0, const SpaceTimeGrid& grid,
                      const SolverConfig& cfg = {},
                      const std::function<void(int, double, std::span<const double>)>& observer = {}) {
    const auto& g = grid.space;
    const std::size_t n = g.size();
    if (rho0.size() != n) throw std::invalid_argument("solve_fp: initial density has wrong size");
    for (double v : rho0)
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("solve_fp: initial density must be >= 0");
    const double mass0 = g.integrate(rho0);
    if (!(mass0 > 0.0)) throw std::invalid_argument("solve_fp: initial density has no mass");
    if (cfg.require_unit_mass && std::abs(mass0 - 1.0) > 1e-6)
        log(LogLevel::warn, "solve_fp: initial mass differs from 1 by " + std::to_string(mass0 - 1.0));
    if (cfg.store_every < 1 || grid.steps % cfg.store_every != 0)
        throw std::invalid_argument("solve_fp: store_every must divide the step count");
    const double theta = cfg.scheme == Scheme::explicit_euler ? 0.0 : cfg.theta;
    if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("solve_fp: theta outside [0,1]");

    {
        double amin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) amin = std::min(amin, min_eigenvalue(c.A(0.0, g.point(i))));
        if (!(amin > 0.0)) throw std::invalid_argument("solve_fp: diffusion matrix not positive definite on grid");
    }

    const int stored = grid.steps / cfg.store_every;
    Field out(SpaceTimeGrid(g, grid.dt * cfg.store_every, stored));
    std::copy(rho0.begin(), rho0.end(), out.slice(0).begin());
    if (observer) observer(0, 0.0, rho0);

    std::vector<double> cur(rho0.begin(), rho0.end()), next(n), rhs(n), tmp(n), cross_prev(n), cross_cur(n);
    const double dt = grid.dt;
    const bool frozen = c.is_time_independent();
    std::optional<FluxOperator> op_now(std::in_place, c, g, 0.0);
    std::optional<FluxOperator> op_next;
    Eigen::SparseMatrix<double, Eigen::RowMajor> system;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::DiagonalPreconditioner<double>> bicg;
    bool system_ready = false;

    if (cfg.diagnostics) *cfg.diagnostics << "step,t,mass,min_density,clipped_mass\n" << std::setprecision(17);

    for (int k = 0; k < grid.steps; ++k) {
        const double t = grid.time(k), t1 = grid.time(k + 1);
        const FluxOperator& now = *op_now;
        if (!frozen) op_next.emplace(c, g, t1);
        const FluxOperator& nxt = frozen ? now : *op_next;

        if (cfg.scheme == Scheme::explicit_euler && dt * now.max_abs_diag() > cfg.cfl_safety) {
            std::ostringstream msg;
            msg << "solver: CFL violated at step " << k << " (dt*max|diag| = " << dt * now.max_abs_diag() << ")";
            throw SolverError(msg.str());
        }

        // rhs = rho + (1 - theta) dt K rho + dt * cross
        now.apply_diag(cur, tmp);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = cur[i] + (1.0 - theta) * dt * tmp[i];
        if (now.has_cross()) {
            std::fill(cross_cur.begin(), cross_cur.end(), 0.0);
            now.add_cross(cur, cross_cur);
            // second-order extrapolation of the explicit cross terms after the first step
            const bool ab2 = k > 0 && theta > 0.0;
            for (std::size_t i = 0; i < n; ++i)
                rhs[i] += dt * (ab2 ? 1.5 * cross_cur[i] - 0.5 * cross_prev[i] : cross_cur[i]);
            std::swap(cross_prev, cross_cur);
        }

        if (theta == 0.0) {
            next = rhs;
        } else if (g.dim == 1) {
            detail::thomas_solve(nxt, theta * dt, rhs, next);
        } else {
            if (!system_ready || !frozen) {
                Eigen::SparseMatrix<double, Eigen::RowMajor> id(static_cast<int>(n), static_cast<int>(n));
                id.setIdentity();
                system = id - (theta * dt) * nxt.sparse_diag();
                bicg.setTolerance(cfg.linear_tolerance);
                bicg.setMaxIterations(cfg.max_iterations);
                bicg.compute(system);
                system_ready = true;
            }
            Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n));
            Eigen::Map<Eigen::VectorXd> x(next.data(), static_cast<Eigen::Index>(n));
            Eigen::Map<const Eigen::VectorXd> guess(cur.data(), static_cast<Eigen::Index>(n));
            x = bicg.solveWithGuess(b, guess);
            if (bicg.info() != Eigen::Success)
                throw SolverError("solver: linear solve did not converge at step " + std::to_string(k) +
                                  " (estimated error " + std::to_string(bicg.error()) + ")");
        }

        double min_density = std::numeric_limits<double>::infinity();
        double clipped = 0.0;
        for (double v : next) min_density = std::min(min_density, v);
        if (cfg.positivity == Positivity::clip_renormalize && min_density < 0.0) {
            const double before = g.integrate(next);
            for (double& v : next)
                if (v < 0.0) {
                    clipped -= v;
                    v = 0.0;
                }
            clipped *= g.cell_volume();
            if (clipped > cfg.max_clipped_mass) {
                std::ostringstream msg;
                msg << "solver: clipped mass " << clipped << " exceeds limit at step " << k;
                throw SolverError(msg.str());
            }
            const double after = g.integrate(next);
            if (after > 0.0)
                for (double& v : next) v *= before / after;
        }
        std::swap(cur, next);
        if (!frozen) op_now.swap(op_next);

        if (cfg.diagnostics)
            *cfg.diagnostics << (k + 1) << ',' << t1 << ',' << g.integrate(cur) << ',' << min_density << ','
                             << clipped << '\n';
        if (observer) observer(k + 1, t1, cur);
        if ((k + 1) % cfg.store_every == 0)
            std::copy(cur.begin(), cur.end(), out.slice((k + 1) / cfg.store_every).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Residual checks

struct ResidualReport {
    double value = 0.0;
    double scale = 1.0;  ///< max(1, sup |Lu|)
    double error = 0.0;  ///< quadrature error estimate
    double tolerance = 1e-4;
    [[nodiscard]] double normalized() const { return std::abs(value) / scale; }
    [[nodiscard]] bool pass() const { return std::abs(value) <= tolerance * scale; }
};

namespace detail {

inline double weak_integral(const Field& mu, const CoefficientField& c, const TestFunction& u, double* sup_lu) {
    const auto& g = mu.grid();
    const auto& sp = g.space;
    const auto w = time_weights(g, g.horizon());
    const Support& s = *u.support;
    double total = 0.0, sup = 0.0;
    std::vector<std::size_t> cells;
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        Vec x = sp.point(i);
        if ((x - s.center).norm() < s.radius) {
            cells.push_back(i);
            pts.push_back(std::move(x));
        }
    }
    for (int k = 0; k < g.slices(); ++k) {
        const double t = g.time(k);
        if (t <= s.t0 || t >= s.t1) continue;
        const auto rho = mu.slice(k);
        double acc = 0.0;
        for (std::size_t m = 0; m < cells.size(); ++m) {
            const double lu = eval_L(c, u, t, pts[m]);
            sup = std::max(sup, std::abs(lu));
            acc += lu * rho[cells[m]];
        }
        total += w[k] * acc * sp.cell_volume();
    }
    if (sup_lu) *sup_lu = sup;
    return total;
}

}  // namespace detail

/// int_0^1 int Lu(t,x) rho(t,x) dx dt for a compactly supported test function.
inline ResidualReport weak_residual(const Field& mu, const CoefficientField& c, const TestFunction& u,
                                    double tolerance = 1e-4) {
    if (!u.support) throw RefusedError("weak_residual: test function has no declared support");
    const Support& s = *u.support;
    const auto& sp = mu.space();
    for (int a = 0; a < sp.dim; ++a)
        if (s.center[a] - s.radius < sp.lo[a] || s.center[a] + s.radius > sp.hi[a])
            throw RefusedError("weak_residual: test function support leaves the box");
    if (s.t0 < 0.0 || s.t1 > mu.grid().horizon() + 1e-12)
        throw RefusedError("weak_residual: test function time support leaves the grid horizon");
    ResidualReport r;
    r.tolerance = tolerance;
    double sup = 0.0;
    r.value = detail::weak_integral(mu, c, u, &sup);
    r.scale = std::max(1.0, sup);
    if (mu.can_coarsen()) r.error = std::abs(r.value - detail::weak_integral(mu.coarsened(), c, u, nullptr)) / 3.0;
    return r;
}

/// Five space-time bumps inside the box and (0, horizon): staggered time windows,
/// centers spread along the first axis.
inline std::vector<TestFunction> bump_family(const SpatialGrid& g, double horizon, double radius = 1.0) {
    std::vector<TestFunction> fam;
    const double offsets[5] = {0.0, -0.5, 0.5, -1.0, 1.0};
    const double windows[5][2] = {{0.1, 0.9}, {0.05, 0.6}, {0.3, 0.95}, {0.2, 0.8}, {0.0, 0.5}};
    for (int m = 0; m < 5; ++m) {
        Vec c = Vec::Zero(g.dim);
        c[0] = offsets[m] * radius;
        fam.push_back(bump_test_function(windows[m][0] * horizon, windows[m][1] * horizon, c, radius));
    }
    return fam;
}

struct InitialResidual {
    double deviation = 0.0;  ///< max over zeta of |int zeta rho(t_1) - int zeta d nu|
    double t1 = 0.0;
    double dt = 0.0;
};

/// Compares the first positive time level against nu through spatial bumps.
inline InitialResidual initial_condition_residual(const Field& mu, std::span<const double> nu,
                                                  const std::vector<std::function<double(const Vec&)>>& zetas,
                                                  int level = 1) {
    if (zetas.size() < 3) throw std::invalid_argument("initial_condition_residual: need at least 3 bumps");
    const auto& g = mu.grid();
    if (level < 0 || level > g.steps) throw std::range_error("initial_condition_residual: level outside grid");
    const auto& sp = g.space;
    const auto rho = mu.slice(level);
    InitialResidual r{0.0, g.time(level), g.dt};
    for (const auto& z : zetas) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < sp.size(); ++i) {
            const double zv = z(sp.point(i));
            a += zv * rho[i];
            b += zv * nu[i];
        }
        r.deviation = std::max(r.deviation, std::abs(a - b) * sp.cell_volume());
    }
    return r;
}

}  // namespace fpb
