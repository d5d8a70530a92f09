#pragma once

// Coefficients of the parabolic operator
//   L u = du/dt + a^{ij} d_i d_j u + b^i d_i u
// together with derived quantities (divergence of A, reduced drift) and the
// structural checks on A and b.

#include "fpbounds/grid.hpp"
#include "fpbounds/types.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fpb {

/// Axis-aligned box, used for evaluation domains and sampling regions.
struct Box {
    int dim = 1;
    std::array<double, kMaxDim> lo{0.0, 0.0, 0.0};
    std::array<double, kMaxDim> hi{0.0, 0.0, 0.0};

    static Box symmetric(int d, double half_width) {
        return Box{d, {-half_width, -half_width, -half_width}, {half_width, half_width, half_width}};
    }
    static Box of(const SpatialGrid& g) { return Box{g.dim, g.lo, g.hi}; }

    [[nodiscard]] bool contains(const Vec& x, double slack = 0.0) const {
        for (int a = 0; a < dim; ++a)
            if (x[a] < lo[a] - slack || x[a] > hi[a] + slack) return false;
        return true;
    }
    [[nodiscard]] double width(int a) const { return hi[a] - lo[a]; }
};

using MatFn = std::function<Mat(double, const Vec&)>;
using VecFn = std::function<Vec(double, const Vec&)>;
/// dA[k] = d/dx_k A(t, x).
using DerivA = std::array<Mat, kMaxDim>;
using DerivAFn = std::function<DerivA(double, const Vec&)>;

inline double operator_norm(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double min_eigenvalue(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Diffusion matrix A(t, x) and drift b(t, x) with optional analytic dA and
/// declared structural constants. Immutable once built; evaluation is pure.
class CoefficientField {
public:
    CoefficientField() = default;

    CoefficientField(int dim, MatFn a, VecFn b, std::string name = "custom")
        : dim_(dim), a_(std::move(a)), b_(std::move(b)), name_(std::move(name)) {
        if (dim_ < 1 || dim_ > kMaxDim) throw std::invalid_argument("coefficients: dimension must be 1..3");
    }

    CoefficientField& with_derivative(DerivAFn da) {
        da_ = std::move(da);
        return *this;
    }
    CoefficientField& with_alpha(double v) {
        alpha_ = v;
        return *this;
    }
    CoefficientField& with_lambda(double v) {
        lambda_ = v;
        return *this;
    }
    CoefficientField& with_bound(double v) {
        m_bound_ = v;
        return *this;
    }
    CoefficientField& with_domain(Box box) {
        domain_ = box;
        return *this;
    }
    CoefficientField& time_independent(bool v = true) {
        time_independent_ = v;
        return *this;
    }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] std::optional<double> declared_alpha() const { return alpha_; }
    [[nodiscard]] std::optional<double> declared_lambda() const { return lambda_; }
    [[nodiscard]] std::optional<double> declared_bound() const { return m_bound_; }
    [[nodiscard]] const std::optional<Box>& domain() const { return domain_; }
    [[nodiscard]] bool is_time_independent() const { return time_independent_; }
    [[nodiscard]] bool has_analytic_derivative() const { return static_cast<bool>(da_); }

    /// Symmetrized diffusion matrix; throws std::domain_error outside the domain.
    [[nodiscard]] Mat A(double t, const Vec& x) const {
        check_domain(t, x);
        return symmetrized(a_(t, x));
    }

    [[nodiscard]] Vec b(double t, const Vec& x) const {
        check_domain(t, x);
        return b_(t, x);
    }

    /// Spatial derivatives of A: analytic when supplied, central differences otherwise.
    [[nodiscard]] DerivA dA(double t, const Vec& x) const {
        check_domain(t, x);
        if (da_) return da_(t, x);
        return dA_fd(t, x, default_fd_step());
    }

    /// Central-difference derivative of A with explicit step per axis.
    [[nodiscard]] DerivA dA_fd(double t, const Vec& x, double step) const {
        DerivA out;
        for (int k = 0; k < kMaxDim; ++k) out[k] = Mat::Zero(dim_, dim_);
        for (int k = 0; k < dim_; ++k) {
            Vec xp = x, xm = x;
            xp[k] += step;
            xm[k] -= step;
            out[k] = (symmetrized(a_(t, xp)) - symmetrized(a_(t, xm))) / (2.0 * step);
        }
        return out;
    }

    /// Step h = (domain width) * 1e-5; unit width when no domain is declared.
    [[nodiscard]] double default_fd_step() const {
        double w = 1.0;
        if (domain_) {
            w = 0.0;
            for (int a = 0; a < dim_; ++a) w = std::max(w, domain_->width(a));
        }
        return w * 1e-5;
    }

    /// Row divergence sum_i d_i a^{ij}, one entry per j.
    [[nodiscard]] Vec divergence(double t, const Vec& x) const {
        const DerivA d = dA(t, x);
        Vec div = Vec::Zero(dim_);
        for (int j = 0; j < dim_; ++j)
            for (int i = 0; i < dim_; ++i) div[j] += d[i](i, j);
        return div;
    }

private:
    void check_domain(double t, const Vec& x) const {
        if (x.size() != dim_) throw std::domain_error("coefficients: point has wrong dimension");
        if (t < -1e-12 || t > 1.0 + 1e-12) throw std::domain_error("coefficients: time outside [0,1]");
        if (domain_ && !domain_->contains(x, 1e-12))
            throw std::domain_error("coefficients: point outside evaluation domain");
    }

    [[nodiscard]] static Mat symmetrized(const Mat& m) {
        const Mat s = 0.5 * (m + m.transpose());
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
            static std::atomic<bool> warned{false};
            if (!warned.exchange(true)) log(LogLevel::warn, "diffusion matrix asymmetric beyond 1e-9; symmetrizing");
        }
        return s;
    }

    int dim_ = 1;
    MatFn a_;
    VecFn b_;
    DerivAFn da_;
    std::optional<double> alpha_, lambda_, m_bound_;
    std::optional<Box> domain_;
    bool time_independent_ = false;
    std::string name_;
};

// ---------------------------------------------------------------------------
// Test functions

/// Support of a test function: time interval and spatial ball.
struct Support {
    double t0 = 0.0, t1 = 1.0;
    Vec center;
    double radius = 1.0;
};

/// Smooth function u(t, x) with exact derivatives.
struct TestFunction {
    std::function<double(double, const Vec&)> u;
    std::function<double(double, const Vec&)> du_t;
    std::function<Vec(double, const Vec&)> grad_x;
    std::function<Mat(double, const Vec&)> hess_x;
    std::optional<Support> support;

    /// Linear combination c1 * f + c2 * g, with no declared support.
    static TestFunction combine(double c1, const TestFunction& f, double c2, const TestFunction& g) {
        TestFunction out;
        out.u = [=](double t, const Vec& x) { return c1 * f.u(t, x) + c2 * g.u(t, x); };
        out.du_t = [=](double t, const Vec& x) { return c1 * f.du_t(t, x) + c2 * g.du_t(t, x); };
        out.grad_x = [=](double t, const Vec& x) -> Vec { return c1 * f.grad_x(t, x) + c2 * g.grad_x(t, x); };
        out.hess_x = [=](double t, const Vec& x) -> Mat { return c1 * f.hess_x(t, x) + c2 * g.hess_x(t, x); };
        return out;
    }
};

namespace detail {

// Bump profile g(q) = exp(-1/(1-q)) for q < 1, with derivatives in q.
struct BumpProfile {
    double g, g1, g2;
};

inline BumpProfile bump_profile(double q) {
    if (q >= 1.0) return {0.0, 0.0, 0.0};
    const double s = 1.0 - q;
    const double g = std::exp(-1.0 / s);
    return {g, -g / (s * s), g * (2.0 * q - 1.0) / (s * s * s * s)};
}

}  // namespace detail

/// Product bump phi(t) psi(x): phi supported on (t0, t1), psi on the ball B(center, radius).
inline TestFunction bump_test_function(double t0, double t1, Vec center, double radius) {
    if (!(t1 > t0) || !(radius > 0.0)) throw std::invalid_argument("bump: empty support");
    const double tm = 0.5 * (t0 + t1), th = 0.5 * (t1 - t0);
    auto phi = [=](double t) {
        const double s = (t - tm) / th;
        const auto p = detail::bump_profile(s * s);
        return std::pair{p.g, p.g1 * 2.0 * s / th};
    };
    auto psi = [=](const Vec& x) {
        const Vec y = (x - center) / radius;
        return detail::bump_profile(y.squaredNorm());
    };
    TestFunction f;
    f.u = [=](double t, const Vec& x) { return phi(t).first * psi(x).g; };
    f.du_t = [=](double t, const Vec& x) { return phi(t).second * psi(x).g; };
    f.grad_x = [=](double t, const Vec& x) -> Vec {
        const Vec y = (x - center) / radius;
        return phi(t).first * psi(x).g1 * 2.0 * y / radius;
    };
    f.hess_x = [=](double t, const Vec& x) -> Mat {
        const Vec y = (x - center) / radius;
        const auto p = psi(x);
        const Mat id = Mat::Identity(x.size(), x.size());
        const Mat h = p.g2 * 4.0 * y * y.transpose() / (radius * radius) + p.g1 * 2.0 * id / (radius * radius);
        return phi(t).first * h;
    };
    f.support = Support{t0, t1, center, radius};
    return f;
}

/// Time-independent spatial bump psi(x) (for initial-condition checks).
inline std::function<double(const Vec&)> spatial_bump(Vec center, double radius) {
    return [=](const Vec& x) {
        const Vec y = (x - center) / radius;
        return detail::bump_profile(y.squaredNorm()).g;
    };
}

// ---------------------------------------------------------------------------
// Operations

/// L u(t, x) = du/dt + a^{ij} d_i d_j u + b^i d_i u.
inline double eval_L(const CoefficientField& c, const TestFunction& u, double t, const Vec& x) {
    const Mat a = c.A(t, x);
    const Vec b = c.b(t, x);
    return u.du_t(t, x) + (a.cwiseProduct(u.hess_x(t, x))).sum() + b.dot(u.grad_x(t, x));
}

/// Theta_A = sum_j | sum_i d_i a^{ij} |.
inline double theta_A(const CoefficientField& c, double t, const Vec& x) {
    return c.divergence(t, x).cwiseAbs().sum();
}

/// b0^j = b^j - sum_i d_i a^{ij}.
inline Vec reduced_drift_b0(const CoefficientField& c, double t, const Vec& x) {
    return c.b(t, x) - c.divergence(t, x);
}

/// Sampled structural constants of A.
struct ConstantsEstimate {
    double alpha = 0.0;   ///< min over samples of the smallest eigenvalue
    double lambda = 0.0;  ///< max sampled difference quotient ||A(t,x)-A(t,y)|| / |x-y|
    double M = 0.0;       ///< max sampled operator norm
    bool degenerate = false;
};

namespace detail {

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = 0.5 * (a + b);
        return v;
    }
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

// Visits every node of a tensor lattice with `n` points per axis.
template <class F>
void for_each_node(const Box& box, int n, F&& visit) {
    std::array<std::vector<double>, kMaxDim> axes;
    for (int a = 0; a < box.dim; ++a) axes[a] = linspace(box.lo[a], box.hi[a], n);
    std::array<int, kMaxDim> idx{0, 0, 0};
    std::size_t total = 1;
    for (int a = 0; a < box.dim; ++a) total *= static_cast<std::size_t>(n);
    Vec x(box.dim);
    for (std::size_t f = 0; f < total; ++f) {
        std::size_t r = f;
        for (int a = 0; a < box.dim; ++a) {
            idx[a] = static_cast<int>(r % n);
            r /= n;
            x[a] = axes[a][idx[a]];
        }
        visit(x, idx);
    }
}

inline std::vector<double> sample_times(const CoefficientField& c, int slices) {
    if (c.is_time_independent()) return {0.0};
    return linspace(0.0, 1.0, std::max(slices, 2));
}

}  // namespace detail

/// Dense-sampling estimate of (alpha, lambda, M) on `box`.
inline ConstantsEstimate estimate_alpha_lambda(const CoefficientField& c, const Box& box, int samples = 64,
                                               int time_slices = 16) {
    if (samples < 2) throw std::invalid_argument("estimate_alpha_lambda: need at least 2 samples per axis");
    ConstantsEstimate est;
    est.alpha = std::numeric_limits<double>::infinity();
    const int d = c.dim();
    for (double t : detail::sample_times(c, time_slices)) {
        std::vector<Mat> values;
        std::vector<Vec> points;
        detail::for_each_node(box, samples, [&](const Vec& x, const auto&) {
            const Mat a = c.A(t, x);
            values.push_back(a);
            points.push_back(x);
            Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
            est.alpha = std::min(est.alpha, es.eigenvalues().minCoeff());
            est.M = std::max(est.M, es.eigenvalues().cwiseAbs().maxCoeff());
        });
        // neighbours along each axis
        std::size_t stride = 1;
        for (int a = 0; a < d; ++a) {
            for (std::size_t f = 0; f < values.size(); ++f) {
                const std::size_t idx_a = (f / stride) % samples;
                if (idx_a + 1 >= static_cast<std::size_t>(samples)) continue;
                const std::size_t g = f + stride;
                const double dist = (points[g] - points[f]).norm();
                if (dist > 0.0) est.lambda = std::max(est.lambda, operator_norm(values[g] - values[f]) / dist);
            }
            stride *= samples;
        }
    }
    est.degenerate = !(est.alpha > 0.0);
    return est;
}

/// Effective constants: declared metadata wins; sampled values fill the gaps.
struct EffectiveConstants {
    double alpha, lambda, M;
};

inline EffectiveConstants effective_constants(const CoefficientField& c, const Box& box, int samples = 64) {
    const bool need = !c.declared_alpha() || !c.declared_lambda() || !c.declared_bound();
    ConstantsEstimate est;
    if (need) est = estimate_alpha_lambda(c, box, samples);
    EffectiveConstants out{c.declared_alpha().value_or(est.alpha), c.declared_lambda().value_or(est.lambda),
                           c.declared_bound().value_or(est.M)};
    if (c.declared_alpha() && need && est.alpha < *c.declared_alpha() - 1e-9)
        log(LogLevel::warn, "declared alpha exceeds sampled minimum eigenvalue");
    return out;
}

/// Empirical (C1)/(C2) constants over a ball.
struct C1C2Report {
    double M1 = 0.0;  ///< inf det A
    double M2 = 0.0;  ///< sup_t max_ij ||a^{ij}(t,.)||_{W^{p,1}(B)}
    double M3 = 0.0;  ///< sup_t max_i ||b^i(t,.)||_{L^p(B)}
    bool c1_pass = false;
    bool c2_pass = false;
    std::optional<Vec> offending_point;
    std::optional<double> offending_time;
};

inline C1C2Report check_C1_C2(const CoefficientField& c, const Vec& center, double radius, double p,
                              int resolution = 64, int time_slices = 16) {
    const int d = c.dim();
    if (!(p > d + 2)) throw std::invalid_argument("check_C1_C2: exponent p must exceed d + 2");
    if (!(radius > 0.0) || resolution < 2) throw std::invalid_argument("check_C1_C2: bad ball or resolution");
    C1C2Report rep;
    rep.M1 = std::numeric_limits<double>::infinity();
    Box cube{d, {}, {}};
    for (int a = 0; a < d; ++a) {
        cube.lo[a] = center[a] - radius;
        cube.hi[a] = center[a] + radius;
    }
    const double h = 2.0 * radius / resolution;
    double vol = 1.0;
    for (int a = 0; a < d; ++a) vol *= h;

    for (double t : detail::sample_times(c, time_slices)) {
        // determinant on lattice nodes (includes the ball center and axis points)
        detail::for_each_node(cube, resolution + 1, [&](const Vec& x, const auto&) {
            if ((x - center).norm() > radius * (1.0 + 1e-12)) return;
            const double det = c.A(t, x).determinant();
            if (det < rep.M1) {
                rep.M1 = det;
                if (det <= 0.0 && !rep.offending_point) {
                    rep.offending_point = x;
                    rep.offending_time = t;
                }
            }
        });
        // midpoint quadrature on cells whose center lies in the ball
        Mat a_p = Mat::Zero(d, d), grad_p = Mat::Zero(d, d);
        Vec b_p = Vec::Zero(d);
        Box cells{d, {}, {}};
        for (int a = 0; a < d; ++a) {
            cells.lo[a] = cube.lo[a] + 0.5 * h;
            cells.hi[a] = cube.hi[a] - 0.5 * h;
        }
        detail::for_each_node(cells, resolution, [&](const Vec& x, const auto&) {
            if ((x - center).norm() > radius) return;
            const Mat a = c.A(t, x);
            const DerivA da = c.dA(t, x);
            const Vec b = c.b(t, x);
            for (int i = 0; i < d; ++i) {
                b_p[i] += std::pow(std::abs(b[i]), p) * vol;
                for (int j = 0; j < d; ++j) {
                    a_p(i, j) += std::pow(std::abs(a(i, j)), p) * vol;
                    double g2 = 0.0;
                    for (int k = 0; k < d; ++k) g2 += da[k](i, j) * da[k](i, j);
                    grad_p(i, j) += std::pow(g2, 0.5 * p) * vol;
                }
            }
        });
        for (int i = 0; i < d; ++i) {
            rep.M3 = std::max(rep.M3, std::pow(b_p[i], 1.0 / p));
            for (int j = 0; j < d; ++j)
                rep.M2 = std::max(rep.M2, std::pow(a_p(i, j), 1.0 / p) + std::pow(grad_p(i, j), 1.0 / p));
        }
    }
    rep.c1_pass = rep.M1 > 0.0 && std::isfinite(rep.M2);
    rep.c2_pass = std::isfinite(rep.M3);
    return rep;
}

// ---------------------------------------------------------------------------
// Builtin coefficient families

namespace coeffs {

inline DerivA zero_derivative(int d) {
    DerivA z;
    for (auto& m : z) m = Mat::Zero(d, d);
    return z;
}

/// A = diag(a), b = const.
inline CoefficientField constant(int d, Vec diag, Vec drift) {
    if (diag.size() != d || drift.size() != d) throw std::invalid_argument("constant: size mismatch");
    const Mat a = diag.asDiagonal();
    CoefficientField c(
        d, [a](double, const Vec&) { return a; }, [drift](double, const Vec&) { return drift; }, "constant");
    c.with_derivative([d](double, const Vec&) { return zero_derivative(d); })
        .with_alpha(diag.minCoeff())
        .with_lambda(0.0)
        .with_bound(diag.cwiseAbs().maxCoeff())
        .time_independent();
    return c;
}

inline CoefficientField constant(int d, double a, double drift = 0.0) {
    return constant(d, Vec::Constant(d, a), Vec::Constant(d, drift));
}

/// A = a I, b(x) = -theta (x - mean).
inline CoefficientField ornstein_uhlenbeck(int d, double a = 1.0, double theta = 1.0, double mean = 0.0) {
    const Mat am = a * Mat::Identity(d, d);
    CoefficientField c(
        d, [am](double, const Vec&) { return am; },
        [theta, mean](double, const Vec& x) -> Vec { return -theta * (x.array() - mean).matrix(); },
        "ornstein_uhlenbeck");
    c.with_derivative([d](double, const Vec&) { return zero_derivative(d); })
        .with_alpha(a)
        .with_lambda(0.0)
        .with_bound(a)
        .time_independent();
    return c;
}

/// A = a I, b(x) = c1 x - c3 |x|^2 x.
inline CoefficientField polynomial_drift(int d, double a, double c1, double c3) {
    const Mat am = a * Mat::Identity(d, d);
    CoefficientField c(
        d, [am](double, const Vec&) { return am; },
        [c1, c3](double, const Vec& x) -> Vec { return (c1 - c3 * x.squaredNorm()) * x; }, "polynomial_drift");
    c.with_derivative([d](double, const Vec&) { return zero_derivative(d); })
        .with_alpha(a)
        .with_lambda(0.0)
        .with_bound(a)
        .time_independent();
    return c;
}

/// A = diag(a0 + amp sin(freq x_k)), b(x) = -theta x.
inline CoefficientField perturbed_identity(int d, double a0, double amp, double freq = 1.0, double theta = 1.0) {
    if (!(a0 > std::abs(amp))) throw std::invalid_argument("perturbed_identity: need a0 > |amp|");
    CoefficientField c(
        d,
        [=](double, const Vec& x) -> Mat {
            Mat m = Mat::Zero(d, d);
            for (int k = 0; k < d; ++k) m(k, k) = a0 + amp * std::sin(freq * x[k]);
            return m;
        },
        [theta](double, const Vec& x) -> Vec { return -theta * x; }, "perturbed_identity");
    c.with_derivative([=](double, const Vec& x) {
         DerivA da = zero_derivative(d);
         for (int k = 0; k < d; ++k) da[k](k, k) = amp * freq * std::cos(freq * x[k]);
         return da;
     })
        .with_alpha(a0 - std::abs(amp))
        .with_lambda(std::abs(amp * freq))
        .with_bound(a0 + std::abs(amp))
        .time_independent();
    return c;
}

/// Time-independent coefficients tabulated on a regular node lattice, multilinear
/// interpolation, derivative by central differences.
///
/// CSV columns: x0[,x1[,x2]], then the upper triangle of A row by row, then b.
/// Rows may appear in any order but must fill a full tensor lattice.
inline CoefficientField table(int d, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("coefficient table: cannot open " + path);
    const int na = d * (d + 1) / 2;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::vector<double> row;
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) continue;  // header
        if (static_cast<int>(row.size()) != d + na + d)
            throw std::runtime_error("coefficient table: wrong column count");
        rows.push_back(std::move(row));
    }
    std::array<std::vector<double>, kMaxDim> axes;
    for (int a = 0; a < d; ++a) {
        for (const auto& r : rows) axes[a].push_back(r[a]);
        std::sort(axes[a].begin(), axes[a].end());
        axes[a].erase(std::unique(axes[a].begin(), axes[a].end()), axes[a].end());
        if (axes[a].size() < 2) throw std::runtime_error("coefficient table: need 2 nodes per axis");
    }
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= axes[a].size();
    if (total != rows.size()) throw std::runtime_error("coefficient table: rows do not form a full lattice");
    auto node_index = [&](const std::vector<double>& r) {
        std::size_t f = 0;
        for (int a = d - 1; a >= 0; --a) {
            const auto pos = std::lower_bound(axes[a].begin(), axes[a].end(), r[a]) - axes[a].begin();
            f = f * axes[a].size() + static_cast<std::size_t>(pos);
        }
        return f;
    };
    auto values = std::make_shared<std::vector<std::vector<double>>>(total);
    for (const auto& r : rows) (*values)[node_index(r)] = std::vector<double>(r.begin() + d, r.end());
    auto interp = [=](const Vec& x) {
        std::array<std::size_t, kMaxDim> i0{};
        std::array<double, kMaxDim> w{};
        for (int a = 0; a < d; ++a) {
            const auto& ax = axes[a];
            const double xc = std::clamp(x[a], ax.front(), ax.back());
            std::size_t k = static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), xc) - ax.begin());
            k = std::clamp<std::size_t>(k, 1, ax.size() - 1) - 1;
            i0[a] = k;
            w[a] = (xc - ax[k]) / (ax[k + 1] - ax[k]);
        }
        std::vector<double> out(na + d, 0.0);
        for (int corner = 0; corner < (1 << d); ++corner) {
            double weight = 1.0;
            std::size_t f = 0;
            for (int a = d - 1; a >= 0; --a) {
                const int bit = (corner >> a) & 1;
                weight *= bit ? w[a] : 1.0 - w[a];
                f = f * axes[a].size() + i0[a] + bit;
            }
            if (weight == 0.0) continue;
            const auto& v = (*values)[f];
            for (std::size_t m = 0; m < out.size(); ++m) out[m] += weight * v[m];
        }
        return out;
    };
    Box dom{d, {}, {}};
    for (int a = 0; a < d; ++a) {
        dom.lo[a] = axes[a].front();
        dom.hi[a] = axes[a].back();
    }
    CoefficientField c(
        d,
        [=](double, const Vec& x) -> Mat {
            const auto v = interp(x);
            Mat m(d, d);
            int q = 0;
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j) m(i, j) = m(j, i) = v[q++];
            return m;
        },
        [=](double, const Vec& x) -> Vec {
            const auto v = interp(x);
            Vec b(d);
            for (int i = 0; i < d; ++i) b[i] = v[na + i];
            return b;
        },
        "table");
    c.with_domain(dom).time_independent();
    return c;
}

}  // namespace coeffs
}  // namespace fpb
