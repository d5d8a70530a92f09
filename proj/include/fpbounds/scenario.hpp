#pragma once

// INI scenarios: coefficient + initial density + grid + solver, followed by a
// list of checks evaluated on the solved field.

#include "fpbounds/bounds.hpp"
#include "fpbounds/coeff.hpp"
#include "fpbounds/field.hpp"
#include "fpbounds/ladder.hpp"
#include "fpbounds/lyapunov.hpp"
#include "fpbounds/oracle.hpp"
#include "fpbounds/report.hpp"
#include "fpbounds/solver.hpp"

#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fpb {

/// Malformed config or a parameter outside a check's preconditions.
struct ScenarioError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { exit_ok = 0, exit_violated = 1, exit_config = 2, exit_solver = 3 };

using Params = boost::property_tree::ptree;

struct CheckSpec {
    std::string kind;   ///< one of check_names()
    std::string label;  ///< instance label (defaults to the kind)
    Params params;
};

struct Scenario {
    std::string name;
    std::filesystem::path base_dir;  ///< relative paths resolve against this
    Params coefficients, initial, grid, solver, output;
    std::vector<CheckSpec> checks;
};

inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = {"weak_residual", "thm21",  "thm22",    "lemma31",
                                                   "lemma32",       "ladder31", "ladder32", "lyapunov",
                                                   "thm33",         "example31", "cond213"};
    return names;
}

inline const std::vector<std::string>& coefficient_builtins() {
    static const std::vector<std::string> names = {"constant", "ornstein_uhlenbeck", "polynomial_drift",
                                                   "perturbed_identity", "table"};
    return names;
}

struct CheckDoc {
    std::string summary;
    std::string formula;
    std::string params;
};

inline const CheckDoc& describe_check(const std::string& name) {
    static const std::vector<std::pair<std::string, CheckDoc>> docs = {
        {"weak_residual",
         {"weak form of the equation against a five-member family of space-time bumps",
          "|int int L u drho dt| <= tol * max(1, sup |L u|)",
          "radius (1), tolerance (1e-4), initial_tolerance (1e-3)"}},
        {"thm21",
         {"Fisher information integral of the density",
          "int_0^tau int |grad rho|^2/rho <= alpha^-2 (||b||_{2,mu} + lambda d^{3/2} sqrt(d(d+2)))^2 + 2 ln2/alpha"
          " + (2/alpha) int rho0 ln rho0 + (2/alpha)(d+1) int rho_tau ln max(|x|,1)"
          " [+ (2/alpha) ln Z_d, normalized form]",
          "tau, form (normalized | printed)"}},
        {"thm22",
         {"weighted Fisher bound with the reduced drift b0 = b - div A",
          "int_0^tau int <A grad rho, grad rho>/rho <= int_0^tau int <A^-1 b0, b0> d mu + 2 (H(rho0) - H(rho_tau)),"
          " H = int rho ln rho",
          "tau"}},
        {"lemma31",
         {"interpolation step for the iteration",
          "||u||_p <= ||u||_{2d/(d-2)}^delta ||u||_2^(1-delta), delta = d/2 - d/p = 2/q",
          "p, q (exact rationals), tau, source (solution | random), samples (for random)"}},
        {"lemma32",
         {"energy estimate with the traceable constant C = (2/alpha^2) max(d^3 lambda^2, 1)",
          "2/(alpha k(k+1)) int rho_tau^{k+1} + int int |grad rho|^2 rho^{k-1}"
          " <= C (gamma(s) + B(s)) T + 2/(alpha k(k+1)) int rho0^{k+1}",
          "k, s, tau, mode (sup_norm | space_time)"}},
        {"ladder31",
         {"L^{p,q} exponent ladder audited in exact arithmetic",
          "p_1 = d/(d-2), q_1 = 1, p_n = p_{n-1} + 2/(d-2), q_n = q_{n-1} + 2/d", "dim, steps"}},
        {"ladder32",
         {"L^p exponent ladder and the boundedness certificate for A_n",
          "p_n = r (p_{n-1} + 2/(beta-2)), r = (d+2)(beta-2)/(d beta); sup A_n <= max(A1, C, 1) exp(sum)",
          "dim, beta (> dim+2), steps, A1, C1, C"}},
        {"lyapunov",
         {"Lyapunov inequality on a node lattice, optionally with a drift condition",
          "L V <= c1 V + c2;  <b,x> <= k1 |x|^2 + k2  or  k1 |x|^2 ln(|x|+1) + k2",
          "potential (log_sq | log_sq_squared | exp_power | square_norm | constant), K, r, value, c1, c2, samples, half_width,"
          " drift (none | quadratic | quad_log), k1, k2"}},
        {"thm33",
         {"weighted pointwise bound rho <= C_tau / Phi",
          "Phi^{1+eps}, |L Phi|^{beta/2} Phi^{1-beta/2}, |A grad Phi|^beta Phi^{1-beta} in L1(mu),"
          " sup_t int Phi rho_t < inf  =>  C_tau = sup Phi rho",
          "potential, K, r, tau, beta (> d+2), epsilon (0.1)"}},
        {"example31",
         {"sufficient conditions for rho <= C(tau) exp(-K |x|^r)",
          "<b,x> <= c1 - c2 |x|^r with c2 > 2 r K sup||A||; |b| in L^beta(mu); exp((2K+eps)|x|^r) in L1(mu)",
          "K, r, beta (> d+2), tau, c2 (fitted when absent)"}},
        {"cond213",
         {"shell diagnostic for unbounded diffusion (evidence only)",
          "D(r) = int int_{r<=|x|<=2r} [r^-4 ||A||^2 + r^-2 Theta_A^2] d mu",
          "radii (comma separated), tolerance (1e-3)"}},
    };
    for (const auto& [k, v] : docs)
        if (k == name) return v;
    throw ScenarioError("unknown check: " + name);
}

namespace detail {

inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ScenarioError("not a number list: " + text);
        }
    }
    if (out.empty()) throw ScenarioError("empty number list");
    return out;
}

template <class T>
T get(const Params& p, const std::string& section, const std::string& key) {
    const auto v = p.get_optional<std::string>(key);
    if (!v) throw ScenarioError("[" + section + "] missing key '" + key + "'");
    try {
        if constexpr (std::is_same_v<T, std::string>) {
            return *v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (*v == "true" || *v == "1" || *v == "yes") return true;
            if (*v == "false" || *v == "0" || *v == "no") return false;
            throw boost::bad_lexical_cast();
        } else {
            return boost::lexical_cast<T>(*v);
        }
    } catch (const boost::bad_lexical_cast&) {
        throw ScenarioError("[" + section + "] bad value for '" + key + "': " + *v);
    }
}

template <class T>
T get_or(const Params& p, const std::string& section, const std::string& key, T fallback) {
    return p.count(key) ? get<T>(p, section, key) : fallback;
}

inline Rational get_rational(const Params& p, const std::string& section, const std::string& key) {
    try {
        return parse_rational(get<std::string>(p, section, key));
    } catch (const std::invalid_argument& e) {
        if (dynamic_cast<const ScenarioError*>(&e)) throw;
        throw ScenarioError("[" + section + "] " + e.what());
    }
}

inline Vec get_vec(const Params& p, const std::string& section, const std::string& key, int d, double fallback) {
    if (!p.count(key)) return Vec::Constant(d, fallback);
    const auto v = parse_list(get<std::string>(p, section, key));
    if (v.size() == 1) return Vec::Constant(d, v[0]);
    if (static_cast<int>(v.size()) != d) throw ScenarioError("[" + section + "] '" + key + "' needs 1 or d values");
    return Eigen::Map<const Vec>(v.data(), d);
}

inline int scenario_dim(const Scenario& s) { return get<int>(s.coefficients, "coefficients", "dim"); }

inline void require_keys(const CheckSpec& c, std::initializer_list<const char*> keys) {
    for (const char* k : keys)
        if (!c.params.count(k)) throw ScenarioError("[check." + c.label + "] missing key '" + k + "'");
}

inline void require(bool ok, const CheckSpec& c, const std::string& what) {
    if (!ok) throw ScenarioError("[check." + c.label + "] " + what);
}

// Parse-stage validation: every check has its required keys and satisfies
// the preconditions that do not need a solved field.
inline void validate(const Scenario& s) {
    const int d = scenario_dim(s);
    if (d < 1 || d > kMaxDim) throw ScenarioError("[coefficients] dim must be 1, 2 or 3");
    const auto& builtins = coefficient_builtins();
    const auto b = get<std::string>(s.coefficients, "coefficients", "builtin");
    if (std::find(builtins.begin(), builtins.end(), b) == builtins.end())
        throw ScenarioError("[coefficients] unknown builtin '" + b + "'");
    get<double>(s.grid, "grid", "half_width");
    get<int>(s.grid, "grid", "cells");
    get<double>(s.grid, "grid", "dt");
    get<double>(s.grid, "grid", "horizon");
    for (const auto& c : s.checks) {
        const std::string sec = "check." + c.label;
        const auto& p = c.params;
        if (c.kind == "thm21") {
            require_keys(c, {"tau"});
            const auto f = get_or<std::string>(p, sec, "form", "normalized");
            require(f == "normalized" || f == "printed", c, "form must be normalized or printed");
        } else if (c.kind == "thm22") {
            require_keys(c, {"tau"});
        } else if (c.kind == "lemma31") {
            require_keys(c, {"p", "q", "tau"});
            get_rational(p, sec, "p");
            get_rational(p, sec, "q");
            require(d > 2, c, "requires d > 2");
        } else if (c.kind == "lemma32") {
            require_keys(c, {"k", "s", "tau"});
            require(get<double>(p, sec, "s") > 2.0, c, "requires s > 2");
            const auto m = get_or<std::string>(p, sec, "mode", "sup_norm");
            require(m == "sup_norm" || m == "space_time", c, "mode must be sup_norm or space_time");
        } else if (c.kind == "ladder31") {
            require_keys(c, {"steps"});
            require(get_or<int>(p, sec, "dim", d) >= 3, c, "requires dim >= 3");
        } else if (c.kind == "ladder32") {
            require_keys(c, {"beta", "steps"});
            const int dd = get_or<int>(p, sec, "dim", d);
            require(dd >= 3, c, "requires dim >= 3");
            require(get_rational(p, sec, "beta") > dd + 2, c, "requires beta > dim + 2");
        } else if (c.kind == "lyapunov") {
            require_keys(c, {"potential", "c1", "c2"});
            const auto dr = get_or<std::string>(p, sec, "drift", "none");
            require(dr == "none" || dr == "quadratic" || dr == "quad_log", c, "drift must be none, quadratic or quad_log");
            if (dr != "none") require_keys(c, {"k1", "k2"});
        } else if (c.kind == "thm33") {
            require_keys(c, {"potential", "tau", "beta"});
            require(get<double>(p, sec, "beta") > d + 2, c, "requires beta > d + 2");
        } else if (c.kind == "example31") {
            require_keys(c, {"K", "r", "beta", "tau"});
            require(get<double>(p, sec, "beta") > d + 2, c, "requires beta > d + 2");
        } else if (c.kind == "cond213") {
            require_keys(c, {"radii"});
            parse_list(get<std::string>(p, sec, "radii"));
        } else if (c.kind != "weak_residual") {
            throw ScenarioError("unknown check: " + c.kind);
        }
    }
}

}  // namespace detail

/// Reads an INI scenario. Sections: [scenario], [coefficients], [initial], [grid],
/// [solver], [output], and any number of [check.<kind>] or [check.<kind>.<label>].
inline Scenario parse_scenario(std::istream& in, const std::filesystem::path& base_dir = ".") {
    const std::string text(std::istreambuf_iterator<char>(in), {});
    Params root;
    try {
        std::istringstream is(text);
        boost::property_tree::ini_parser::read_ini(is, root);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ScenarioError(std::string("ini: ") + e.what());
    }
    // read_ini drops sections without keys; rebuild in file order so they survive.
    {
        Params ordered;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            const auto a = line.find_first_not_of(" \t\r");
            const auto b = line.find_last_not_of(" \t\r");
            if (a == std::string::npos || line[a] != '[' || line[b] != ']') continue;
            const std::string name = line.substr(a + 1, b - a - 1);
            if (ordered.find(name) != ordered.not_found()) continue;
            const auto it = root.find(name);
            ordered.push_back({name, it == root.not_found() ? Params{} : it->second});
        }
        root = std::move(ordered);
    }
    Scenario s;
    s.base_dir = base_dir;
    for (const auto& [key, node] : root) {
        if (key == "scenario") s.name = node.get<std::string>("name", "");
        else if (key == "coefficients") s.coefficients = node;
        else if (key == "initial") s.initial = node;
        else if (key == "grid") s.grid = node;
        else if (key == "solver") s.solver = node;
        else if (key == "output") s.output = node;
        else if (key.rfind("check.", 0) == 0) {
            const std::string rest = key.substr(6);
            const auto dot = rest.find('.');
            CheckSpec c;
            c.kind = rest.substr(0, dot);
            c.label = dot == std::string::npos ? rest : rest.substr(dot + 1);
            c.params = node;
            s.checks.push_back(std::move(c));
        } else {
            throw ScenarioError("unknown section [" + key + "]");
        }
    }
    if (s.coefficients.empty()) throw ScenarioError("missing [coefficients]");
    if (s.grid.empty()) throw ScenarioError("missing [grid]");
    detail::validate(s);
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open " + path.string());
    Scenario s = parse_scenario(in, path.parent_path());
    if (s.name.empty()) s.name = path.stem().string();
    return s;
}

inline CoefficientField build_coefficients(const Scenario& s) {
    const auto& p = s.coefficients;
    const std::string sec = "coefficients";
    const int d = detail::scenario_dim(s);
    const auto b = detail::get<std::string>(p, sec, "builtin");
    if (b == "constant")
        return coeffs::constant(d, detail::get_vec(p, sec, "a", d, 1.0), detail::get_vec(p, sec, "drift", d, 0.0));
    if (b == "ornstein_uhlenbeck")
        return coeffs::ornstein_uhlenbeck(d, detail::get_or(p, sec, "a", 1.0), detail::get_or(p, sec, "theta", 1.0),
                                          detail::get_or(p, sec, "mean", 0.0));
    if (b == "polynomial_drift")
        return coeffs::polynomial_drift(d, detail::get_or(p, sec, "a", 1.0), detail::get<double>(p, sec, "c1"),
                                        detail::get<double>(p, sec, "c3"));
    if (b == "perturbed_identity")
        return coeffs::perturbed_identity(d, detail::get<double>(p, sec, "a0"), detail::get<double>(p, sec, "amp"),
                                          detail::get_or(p, sec, "freq", 1.0), detail::get_or(p, sec, "theta", 1.0));
    const std::filesystem::path table = detail::get<std::string>(p, sec, "path");
    return coeffs::table(d, (table.is_absolute() ? table : s.base_dir / table).string());
}

inline SpaceTimeGrid build_grid(const Scenario& s) {
    const int d = detail::scenario_dim(s);
    const SpatialGrid sp = SpatialGrid::symmetric(d, detail::get<double>(s.grid, "grid", "half_width"),
                                                  detail::get<int>(s.grid, "grid", "cells"));
    return SpaceTimeGrid::until(sp, detail::get<double>(s.grid, "grid", "dt"),
                                detail::get<double>(s.grid, "grid", "horizon"));
}

/// Initial density on `sp`: kind = gaussian (mean, variance) or csv (path to a field table).
inline std::vector<double> build_initial(const Scenario& s, const SpatialGrid& sp) {
    const auto& p = s.initial;
    const std::string sec = "initial";
    const auto kind = detail::get_or<std::string>(p, sec, "kind", "gaussian");
    if (kind == "gaussian") {
        const oracle::GaussianState g(detail::get_vec(p, sec, "mean", sp.dim, 0.0),
                                      detail::get_vec(p, sec, "variance", sp.dim, 1.0));
        const Field f = Field::single(sp, [&](const Vec& x) { return g.density(x); });
        return {f.slice(0).begin(), f.slice(0).end()};
    }
    if (kind == "csv") {
        const std::filesystem::path path = detail::get<std::string>(p, sec, "path");
        std::ifstream in(path.is_absolute() ? path : s.base_dir / path);
        if (!in) throw ScenarioError("[initial] cannot open " + path.string());
        const Field f = read_csv(in);
        if (!(f.space() == sp)) throw ScenarioError("[initial] table grid differs from [grid]");
        return {f.slice(0).begin(), f.slice(0).end()};
    }
    throw ScenarioError("[initial] unknown kind '" + kind + "'");
}

inline SolverConfig build_solver_config(const Scenario& s) {
    const auto& p = s.solver;
    SolverConfig cfg;
    const auto scheme = detail::get_or<std::string>(p, "solver", "scheme", "crank_nicolson");
    if (scheme == "explicit") cfg.scheme = Scheme::explicit_euler;
    else if (scheme != "crank_nicolson") throw ScenarioError("[solver] unknown scheme '" + scheme + "'");
    const auto pos = detail::get_or<std::string>(p, "solver", "positivity", "clip_renormalize");
    if (pos == "off") cfg.positivity = Positivity::off;
    else if (pos != "clip_renormalize") throw ScenarioError("[solver] unknown positivity '" + pos + "'");
    cfg.cfl_safety = detail::get_or(p, "solver", "cfl_safety", cfg.cfl_safety);
    cfg.linear_tolerance = detail::get_or(p, "solver", "linear_tolerance", cfg.linear_tolerance);
    return cfg;
}

/// The same problem at doubled h and dt, or nullopt when the grid does not halve.
inline std::optional<SpaceTimeGrid> coarse_grid(const SpaceTimeGrid& g) {
    if (!g.space.can_coarsen() || g.steps % 2 != 0) return std::nullopt;
    return SpaceTimeGrid(g.space.coarsened(), 2.0 * g.dt, g.steps / 2);
}

/// Every m-th time level of f (m must divide the step count).
inline Field subsample(const Field& f, int m) {
    const auto& g = f.grid();
    if (m <= 1 || g.steps == 0) return f;
    Field out(SpaceTimeGrid(g.space, g.dt * m, g.steps / m));
    for (int k = 0; k <= g.steps / m; ++k) std::ranges::copy(f.slice(k * m), out.slice(k).begin());
    return out;
}

struct RunOptions {
    std::filesystem::path out_dir;  ///< empty: no files written
    int threads = 1;
    std::uint64_t seed = 0;
};

struct RunResult {
    std::vector<BoundReport> rows;
    int exit_code = exit_ok;
    std::string error;  ///< message when exit_code is 2 or 3
};

namespace detail {

inline Potential build_potential(const Params& p, const std::string& sec) {
    const auto name = get<std::string>(p, sec, "potential");
    if (name == "log_sq") return potentials::log_sq();
    if (name == "log_sq_squared") return potentials::log_sq_squared();
    if (name == "square_norm") return potentials::square_norm();
    if (name == "exp_power") return potentials::exp_power(get<double>(p, sec, "K"), get<double>(p, sec, "r"));
    if (name == "constant") return potentials::constant(get<double>(p, sec, "value"));
    throw ScenarioError("[" + sec + "] unknown potential '" + name + "'");
}

inline BoundReport row(const std::string& check, const std::string& name, double lhs, double rhs, double error = 0.0) {
    BoundReport r;
    r.check = check;
    r.name = name;
    r.lhs = lhs;
    r.rhs = rhs;
    r.error = error;
    return r;
}

// A value that only has to be finite: rhs = inf.
inline BoundReport finite_value_row(const std::string& check, const std::string& name, double value, double error,
                                    bool conclusive) {
    BoundReport r = row(check, name, value, kInf, error);
    r.conclusive = conclusive;
    r.verdict = !conclusive ? Verdict::inconclusive : std::isfinite(value) ? Verdict::holds : Verdict::violated;
    return r;
}

// lhs = relative instability of a finiteness probe, rhs = 1%.
inline BoundReport finite_row(const std::string& check, const std::string& name, const FiniteCheck& f,
                              bool conclusive) {
    const double scale = std::abs(f.value);
    const double rel = scale > 0.0 ? std::max(std::abs(f.value - f.inner), f.coarse_error) / scale : kInf;
    BoundReport r = row(check, name, std::isfinite(f.value) ? rel : kInf, 0.01);
    r.inputs = {{"value", f.value}, {"inner", f.inner}, {"refinement_error", f.coarse_error}};
    r.decide(conclusive);
    return r;
}

// Field-level evaluations that get the paired-resolution solver error.
inline std::vector<BoundReport> field_check(const CheckSpec& c, const Field& mu, const CoefficientField& coef,
                                            std::uint64_t seed) {
    const std::string sec = "check." + c.label;
    const auto& p = c.params;
    std::vector<BoundReport> out;
    if (c.kind == "thm21") {
        const auto form = get_or<std::string>(p, sec, "form", "normalized") == "printed" ? Thm21Form::printed
                                                                                       : Thm21Form::normalized;
        out.push_back(bound_thm21(mu, coef, get<double>(p, sec, "tau"), form));
    } else if (c.kind == "thm22") {
        out.push_back(bound_thm22(mu, coef, get<double>(p, sec, "tau")));
    } else if (c.kind == "lemma32") {
        const auto mode = get_or<std::string>(p, sec, "mode", "sup_norm") == "space_time" ? Lemma32Mode::space_time
                                                                                        : Lemma32Mode::sup_norm;
        out.push_back(lemma32_report(mu, coef, get<double>(p, sec, "k"), get<double>(p, sec, "s"),
                                     get<double>(p, sec, "tau"), mode));
    } else if (c.kind == "lemma31") {
        const Rational pp = get_rational(p, sec, "p"), qq = get_rational(p, sec, "q");
        const double tau = get<double>(p, sec, "tau");
        if (get_or<std::string>(p, sec, "source", "solution") == "random") {
            std::mt19937_64 rng(seed);
            const int samples = get_or(p, sec, "samples", 20);
            BoundReport worst;
            double worst_rel = -kInf;
            for (int i = 0; i < samples; ++i) {
                const Field u = random_band_limited(mu.space(), get_or(p, sec, "modes", 4), rng);
                auto rep = interpolation_check_lemma31(u, pp, qq, tau);
                const double rel = (rep.core.lhs - rep.core.rhs) / rep.core.rhs;
                if (rel > worst_rel) {
                    worst_rel = rel;
                    worst = rep.core;
                }
            }
            worst.name = "holder_core_random";
            worst.inputs.emplace_back("samples", samples);
            out.push_back(worst);
        } else {
            out.push_back(interpolation_check_lemma31(mu, pp, qq, tau).core);
        }
    }
    if (c.label != c.kind)
        for (auto& r : out) r.name = c.label;
    return out;
}

inline std::vector<BoundReport> other_check(const CheckSpec& c, const Field& mu, const CoefficientField& coef) {
    const std::string sec = "check." + c.label;
    const auto& p = c.params;
    const int d = coef.dim();
    std::vector<BoundReport> out;
    auto name = [&](const std::string& n) { return c.label == c.kind ? n : c.label + ":" + n; };

    if (c.kind == "weak_residual") {
        const double tol = get_or(p, sec, "tolerance", 1e-4);
        const auto fam = bump_family(mu.space(), mu.grid().horizon(), get_or(p, sec, "radius", 1.0));
        for (std::size_t m = 0; m < fam.size(); ++m) {
            const auto res = weak_residual(mu, coef, fam[m], tol);
            BoundReport r = row(c.kind, name("bump" + std::to_string(m)), std::abs(res.value), tol * res.scale,
                                res.error);
            r.inputs = {{"scale", res.scale}, {"normalized", res.normalized()}};
            r.verdict = res.pass() ? Verdict::holds : Verdict::violated;
            out.push_back(r);
        }
        std::vector<std::function<double(const Vec&)>> zetas;
        for (double off : {0.0, -0.5, 0.5}) {
            Vec cen = Vec::Zero(d);
            cen[0] = off;
            zetas.push_back(spatial_bump(cen, 1.0));
        }
        if (mu.grid().steps > 0) {
            const auto ic = initial_condition_residual(mu, mu.slice(0), zetas);
            BoundReport r = row(c.kind, name("initial"), ic.deviation, get_or(p, sec, "initial_tolerance", 1e-3));
            r.inputs = {{"t1", ic.t1}};
            r.decide();
            out.push_back(r);
        }
    } else if (c.kind == "ladder31") {
        const auto st = moser_ladder_thm31(get_or(p, sec, "dim", d), get<int>(p, sec, "steps"));
        int failed = 0;
        for (bool a : st.audit) failed += a ? 0 : 1;
        BoundReport r = row(c.kind, name("audit"), failed, 0.0);
        std::string ladder;
        for (std::size_t n = 0; n < st.p.size(); ++n)
            ladder += (n ? " " : "") + std::string("(") + to_string(st.p[n]) + "," + to_string(st.q[n]) + ")";
        r.note = ladder;
        r.inputs = {{"steps", static_cast<double>(st.p.size())}, {"increasing", st.strictly_increasing()}};
        r.decide();
        out.push_back(r);
    } else if (c.kind == "ladder32") {
        const auto l = moser_ladder_thm32(get_or(p, sec, "dim", d), get_rational(p, sec, "beta"),
                                          get<int>(p, sec, "steps"), get_or(p, sec, "A1", 1.0),
                                          get_or(p, sec, "C1", 1.0), get_or(p, sec, "C", 1.0));
        int failed = 0;
        for (bool a : l.ladder.audit) failed += a ? 0 : 1;
        BoundReport r = row(c.kind, name("audit"), failed, 0.0);
        r.note = "r = " + to_string(l.ladder.ratio) + ", p_last = " + to_string(l.ladder.p.back());
        r.decide();
        out.push_back(r);
        BoundReport cert = finite_value_row(c.kind, name("certificate"), l.certificate.bound, 0.0, true);
        cert.inputs = {{"sum", l.certificate.sum}, {"partial", l.certificate.partial},
                       {"tail", l.certificate.tail}, {"terms", l.certificate.terms}};
        if (!l.certificate.finite) cert.verdict = Verdict::violated;
        out.push_back(cert);
    } else if (c.kind == "lyapunov") {
        const Potential V = build_potential(p, sec);
        const double hw = get_or(p, sec, "half_width", 0.5 * mu.space().hi[0] - 0.5 * mu.space().lo[0]);
        const Box box = Box::symmetric(d, hw);
        const int samples = get_or(p, sec, "samples", d == 1 ? 2001 : d == 2 ? 101 : 31);
        const double c1 = get<double>(p, sec, "c1"), c2 = get<double>(p, sec, "c2");
        const auto rep = lyapunov_check(V, coef, c1, c2, box, samples);
        BoundReport r = row(c.kind, name(V.family), rep.min_c2, c2);
        r.inputs = {{"c1", c1}, {"half_width", hw}, {"samples", samples}, {"grows", rep.grows}};
        r.decide();
        out.push_back(r);
        const auto dr = get_or<std::string>(p, sec, "drift", "none");
        if (dr != "none") {
            DriftParams prm;
            prm.k1 = get<double>(p, sec, "k1");
            prm.k2 = get<double>(p, sec, "k2");
            const auto drep =
                drift_condition(coef, dr == "quadratic" ? DriftForm::quadratic : DriftForm::quad_log, prm, box, samples);
            BoundReport q = row(c.kind, name("drift_" + dr), drep.max_violation, 0.0);
            q.inputs = {{"k1", prm.k1}, {"k2", prm.k2}};
            q.decide();
            out.push_back(q);
        }
    } else if (c.kind == "thm33") {
        const Potential phi = build_potential(p, sec);
        const double tau = get<double>(p, sec, "tau");
        const auto rep = pointwise_bound_check(mu, phi, coef, tau, get<double>(p, sec, "beta"),
                                               get_or(p, sec, "epsilon", 0.1));
        out.push_back(finite_row(c.kind, name("phi_moment"), rep.phi_moment, rep.conclusive));
        out.push_back(finite_row(c.kind, name("generator_term"), rep.generator_term, rep.conclusive));
        out.push_back(finite_row(c.kind, name("flux_term"), rep.flux_term, rep.conclusive));
        out.push_back(finite_row(c.kind, name("sup_moment"), rep.sup_moment, rep.conclusive));
        BoundReport r = finite_value_row(c.kind, name("C_tau"), rep.C_emp, rep.C_emp_error, rep.conclusive);
        r.inputs = {{"C_inner", rep.C_emp_inner},
                    {"initial_weighted_sup", rep.initial_weighted_sup},
                    {"boundary_mass", rep.boundary_mass},
                    {"phi_min", rep.phi_min}};
        if (r.verdict == Verdict::holds && !rep.pass) r.verdict = Verdict::violated;
        out.push_back(r);
    } else if (c.kind == "example31") {
        const double K = get<double>(p, sec, "K"), r = get<double>(p, sec, "r"), beta = get<double>(p, sec, "beta");
        std::optional<double> c2;
        if (p.count("c2")) c2 = get<double>(p, sec, "c2");
        const auto rep = example31_audit(coef, mu, K, r, beta, get<double>(p, sec, "tau"), c2);
        BoundReport dr = row(c.kind, name("drift_power"), rep.drift.max_violation, 0.0);
        dr.inputs = {{"c1", rep.c1}, {"c2", rep.c2}};
        dr.decide();
        out.push_back(dr);
        BoundReport k = row(c.kind, name("constant"), 2.0 * r * K * rep.drift.M, rep.c2);
        k.inputs = {{"M", rep.drift.M}};
        k.note = "strict, exact rational comparison";
        k.verdict = *rep.drift.constant_ok ? Verdict::holds : Verdict::violated;
        out.push_back(k);
        out.push_back(finite_row(c.kind, name("b_moment"), rep.b_moment, true));
        BoundReport e = finite_row(c.kind, name("exp_moment"), rep.exp_moment, true);
        e.inputs.emplace_back("epsilon", rep.epsilon);
        out.push_back(e);
        out.push_back(finite_row(c.kind, name("sup_moment"), rep.sup_moment, true));
        out.push_back(finite_value_row(c.kind, name("envelope"), rep.envelope_C, 0.0, true));
        if (rep.pointwise) {
            BoundReport ct = finite_value_row(c.kind, name("C_tau"), rep.pointwise->C_emp, rep.pointwise->C_emp_error,
                                              rep.pointwise->conclusive);
            if (ct.verdict == Verdict::holds && !rep.pointwise->pass) ct.verdict = Verdict::violated;
            out.push_back(ct);
        }
    } else if (c.kind == "cond213") {
        const double tol = get_or(p, sec, "tolerance", 1e-3);
        const auto diag = condition_213_diagnostic(mu, coef, parse_list(get<std::string>(p, sec, "radii")), tol);
        for (const auto& [rad, D] : diag.values) {
            BoundReport r = row(c.kind, name("r=" + format_double(rad)), D, tol);
            r.verdict = Verdict::inconclusive;
            r.note = diag.vanishing ? "shell integrals reach the tolerance" : "shell integrals above the tolerance";
            out.push_back(r);
        }
    }
    return out;
}

inline bool uses_solver_pair(const CheckSpec& c) {
    if (c.kind == "lemma31") return c.params.get<std::string>("source", "solution") == "solution";
    return c.kind == "thm21" || c.kind == "thm22" || c.kind == "lemma32";
}

inline bool uses_field_check(const std::string& kind) {
    return kind == "thm21" || kind == "thm22" || kind == "lemma32" || kind == "lemma31";
}

}  // namespace detail

/// Solves the scenario and evaluates its checks. Reports come back in config order.
inline RunResult run_scenario(const Scenario& s, const RunOptions& opt = {}) {
    RunResult res;
    try {
        const CoefficientField coef = build_coefficients(s);
        const SpaceTimeGrid grid = build_grid(s);
        const SolverConfig cfg = build_solver_config(s);
        const auto rho0 = build_initial(s, grid.space);

        std::ofstream diag;
        SolverConfig fine_cfg = cfg;
        if (!opt.out_dir.empty()) {
            std::filesystem::create_directories(opt.out_dir);
            if (detail::get_or(s.output, "output", "diagnostics", false)) {
                diag.open(opt.out_dir / "diagnostics.csv");
                fine_cfg.diagnostics = &diag;
            }
        }
        const bool needs_field = std::any_of(s.checks.begin(), s.checks.end(), [](const CheckSpec& c) {
            return c.kind != "ladder31" && c.kind != "ladder32";
        });
        const Field mu = needs_field ? solve_fp(coef, rho0, grid, fine_cfg)
                                    : Field::single(grid.space, [](const Vec&) { return 0.0; });
        std::optional<Field> coarse;
        const bool pair = detail::get_or(s.solver, "solver", "resolution_pair", true);
        if (pair && needs_field) {
            if (const auto cg = coarse_grid(grid)) {
                const auto c0 = grid.space.coarsen(rho0);
                coarse = solve_fp(coef, c0, *cg, cfg);
            }
        }

        auto evaluate = [&](const CheckSpec& c) {
            if (!detail::uses_field_check(c.kind)) return detail::other_check(c, mu, coef);
            auto fine = detail::field_check(c, mu, coef, opt.seed);
            if (!detail::uses_solver_pair(c)) return fine;
            if (!coarse) {
                for (auto& r : fine) r.note = "no coarse solve; solver error not included";
                return fine;
            }
            const auto cr = detail::field_check(c, *coarse, coef, opt.seed);
            for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = with_resolution_pair(fine[i], cr[i]);
            return fine;
        };
        std::vector<std::vector<BoundReport>> per(s.checks.size());
        if (opt.threads > 1) {
            std::size_t next = 0;
            while (next < s.checks.size()) {
                std::vector<std::future<std::vector<BoundReport>>> batch;
                const std::size_t first = next;
                for (; next < s.checks.size() && next - first < static_cast<std::size_t>(opt.threads); ++next)
                    batch.push_back(std::async(std::launch::async, evaluate, std::cref(s.checks[next])));
                for (std::size_t i = 0; i < batch.size(); ++i) per[first + i] = batch[i].get();
            }
        } else {
            for (std::size_t i = 0; i < s.checks.size(); ++i) per[i] = evaluate(s.checks[i]);
        }
        for (auto& v : per) res.rows.insert(res.rows.end(), v.begin(), v.end());

        if (!opt.out_dir.empty()) {
            std::ofstream csv(opt.out_dir / "ledger.csv");
            write_csv(res.rows, csv);
            std::ofstream txt(opt.out_dir / "ledger.txt");
            txt << "scenario: " << s.name << '\n';
            write_ledger(res.rows, txt);
            const auto dump = detail::get_or<std::string>(s.output, "output", "field", "binary");
            if (dump != "none" && needs_field) {
                int every = detail::get_or(s.output, "output", "dump_every", 0);
                if (every <= 0) {
                    every = std::max(1, grid.steps / 50);
                    while (grid.steps % every != 0) --every;
                }
                if (grid.steps % every != 0) throw ScenarioError("[output] dump_every must divide the step count");
                const Field f = subsample(mu, every);
                if (dump == "binary") {
                    std::ofstream bin(opt.out_dir / "density.bin", std::ios::binary);
                    write_binary(f, bin);
                } else if (dump == "csv") {
                    std::ofstream out(opt.out_dir / "density.csv");
                    write_csv(f, out);
                } else {
                    throw ScenarioError("[output] field must be binary, csv or none");
                }
            }
        }
        res.exit_code = count_verdicts(res.rows).violated > 0 ? exit_violated : exit_ok;
    } catch (const SolverError& e) {
        res.exit_code = exit_solver;
        res.error = e.what();
    } catch (const std::invalid_argument& e) {
        res.exit_code = exit_config;
        res.error = e.what();
    } catch (const std::domain_error& e) {
        res.exit_code = exit_config;
        res.error = e.what();
    } catch (const std::range_error& e) {
        res.exit_code = exit_config;
        res.error = e.what();
    }
    return res;
}

}  // namespace fpb
