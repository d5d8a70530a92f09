#pragma once

// Moser-iteration exponent ladders in exact rational arithmetic, with the
// per-step identity audits and the boundedness certificate for the L^p ladder.

#include "fpbounds/types.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace fpb {

using Rational = boost::multiprecision::cpp_rational;

/// Parses "a/b", an integer, or a finite decimal ("3.25") exactly.
inline Rational parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash != std::string::npos)
            return Rational(boost::multiprecision::cpp_int(text.substr(0, slash)),
                            boost::multiprecision::cpp_int(text.substr(slash + 1)));
        const auto dot = text.find('.');
        if (dot == std::string::npos) return Rational(boost::multiprecision::cpp_int(text));
        std::string digits = text.substr(0, dot) + text.substr(dot + 1);
        boost::multiprecision::cpp_int den = 1;
        for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
        return Rational(boost::multiprecision::cpp_int(digits), den);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a rational number: " + text);
    }
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) {
    std::string s = boost::multiprecision::numerator(r).str();
    if (boost::multiprecision::denominator(r) != 1) s += "/" + boost::multiprecision::denominator(r).str();
    return s;
}

/// Exponent ladder p_n, q_n for the L^{p,q} iteration (q_n empty for the L^p ladder).
struct LadderState {
    int d = 3;
    Rational s_or_beta;
    std::vector<Rational> p, q;
    std::vector<bool> audit;  ///< audit[n] for step n (index 0 unused, true)
    Rational ratio;           ///< growth ratio of the L^p ladder

    [[nodiscard]] bool all_audits_pass() const {
        for (bool a : audit)
            if (!a) return false;
        return true;
    }
    [[nodiscard]] bool strictly_increasing() const {
        for (std::size_t n = 1; n < p.size(); ++n)
            if (!(p[n] > p[n - 1]) || (!q.empty() && !(q[n] > q[n - 1]))) return false;
        return true;
    }
};

/// p_1 = d/(d-2), q_1 = 1, p_n = p_{n-1} + 2/(d-2), q_n = q_{n-1} + 2/d.
/// Audit with s = d and k = q_n - 1:
///   k s/(s-2) + 1 = p_{n-1},  k + (s-2)/s = q_{n-1},  d(k+1)/(d-2) = p_n.
inline LadderState moser_ladder_thm31(int d, int steps) {
    if (d <= 2) throw RefusedError("ladder31: requires d >= 3");
    if (steps < 1) throw std::invalid_argument("ladder31: need at least one step");
    LadderState st;
    st.d = d;
    st.s_or_beta = d;
    const Rational dd(d), s(d);
    st.p.push_back(dd / (dd - 2));
    st.q.push_back(Rational(1));
    st.audit.push_back(true);
    for (int n = 1; n < steps; ++n) {
        st.p.push_back(st.p.back() + Rational(2) / (dd - 2));
        st.q.push_back(st.q.back() + Rational(2) / dd);
        const Rational k = st.q.back() - 1;
        const bool ok = k * s / (s - 2) + 1 == st.p[n - 1] && k + (s - 2) / s == st.q[n - 1] &&
                        dd * (k + 1) / (dd - 2) == st.p[n];
        st.audit.push_back(ok);
    }
    return st;
}

/// Boundedness certificate for the sequence A_n: sup_n A_n <= max(A_1, C, 1) exp(sum).
struct Certificate {
    double sum = 0.0;          ///< sum_{n>=2} (d+2)/(p_n d) ln(p_n^2 C_1 + 1), partial plus tail majorant
    double partial = 0.0;      ///< explicitly summed part
    double tail = 0.0;         ///< geometric majorant of the remainder
    int terms = 0;             ///< index of the last explicitly summed term
    double bound = 0.0;        ///< max(A_1, C, 1) * exp(sum)
    bool finite = false;
};

struct Ladder32 {
    LadderState ladder;
    Certificate certificate;
};

/// p_1 = d/(d-2), p_n = r (p_{n-1} + 2/(beta-2)) with r = (d+2)(beta-2)/(d beta).
/// Audit with k = p_n d/(d+2) - 1: p_{n-1} = k beta/(beta-2) + 1 and
/// p_{n-1}(beta-2)/beta - p_n d/(d+2) = -2/beta, plus 1 < r <= d/(d-2).
inline Ladder32 moser_ladder_thm32(int d, const Rational& beta, int steps, double A1, double C1, double C,
                                   double tail_tolerance = 1e-12) {
    if (d <= 2) throw RefusedError("ladder32: requires d >= 3");
    if (!(beta > d + 2)) throw RefusedError("ladder32: requires beta > d + 2");
    if (steps < 1) throw std::invalid_argument("ladder32: need at least one step");
    if (!(C1 >= 0.0) || !(A1 >= 0.0) || !(C >= 0.0)) throw std::invalid_argument("ladder32: constants must be >= 0");
    Ladder32 out;
    LadderState& st = out.ladder;
    st.d = d;
    st.s_or_beta = beta;
    const Rational dd(d);
    const Rational r = (dd + 2) * (beta - 2) / (dd * beta);
    st.ratio = r;
    const bool ratio_ok = r > 1 && r <= dd / (dd - 2);
    st.p.push_back(dd / (dd - 2));
    st.audit.push_back(ratio_ok);
    for (int n = 1; n < steps; ++n) {
        st.p.push_back(r * (st.p.back() + Rational(2) / (beta - 2)));
        const Rational k = st.p[n] * dd / (dd + 2) - 1;
        const bool ok = st.p[n - 1] == k * beta / (beta - 2) + 1 &&
                        st.p[n - 1] * (beta - 2) / beta - st.p[n] * dd / (dd + 2) == Rational(-2) / beta && ratio_ok;
        st.audit.push_back(ok);
    }

    // Certificate in floating point.
    Certificate& cert = out.certificate;
    const double rd = to_double(r), b = to_double(beta), p1 = to_double(st.p[0]);
    const double c = (d + 2.0) / (d * p1);
    const double pstar = 2.0 * rd / ((b - 2.0) * (1.0 - rd));  // negative fixed point of the recursion
    const double P = p1 - pstar;                                // p_n <= P r^{n-1}
    const double L = std::log(C1 * P * P + 1.0);
    const double x = 1.0 / rd;
    // sum_{m >= N} c x^m [L + 2 m ln r]
    auto tail_from = [&](int N) {
        const double xN = std::pow(x, N);
        const double geo = xN / (1.0 - x);
        const double ari = xN * (N * (1.0 - x) + x) / ((1.0 - x) * (1.0 - x));
        return c * (L * geo + 2.0 * std::log(rd) * ari);
    };
    double pn = p1;
    int n = 1;
    double partial = 0.0;
    const int cap = 1000000;
    while (n < cap) {
        ++n;
        pn = rd * (pn + 2.0 / (b - 2.0));
        partial += (d + 2.0) / (pn * d) * std::log(pn * pn * C1 + 1.0);
        if (tail_from(n) < tail_tolerance) break;  // majorant of terms n+1, n+2, ... (m = n-1+1)
    }
    cert.partial = partial;
    cert.terms = n;
    cert.tail = tail_from(n);
    cert.sum = partial + cert.tail;
    cert.bound = std::max({A1, C, 1.0}) * std::exp(cert.sum);
    cert.finite = std::isfinite(cert.bound) && n < cap;
    return out;
}

}  // namespace fpb
