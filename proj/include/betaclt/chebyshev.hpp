#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace betaclt {

inline constexpr double pi = std::numbers::pi;

enum class Basis { T, U };

/// Coefficient vector in the Chebyshev T- or U-basis; coeffs[k] multiplies T_k (or U_k).
struct ChebSeries {
    Basis basis = Basis::T;
    std::vector<double> coeffs;

    [[nodiscard]] std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }
};

/// A function on a working interval containing [-1,1], with derivatives up to order 4.
/// `eval(x, r)` returns the r-th derivative.
struct TestFunction {
    std::string name;
    std::function<double(double, int)> eval;
    int smoothness = 8;
    /// Monomial coefficients when the function is a polynomial (enables exact power-sum paths).
    std::vector<double> monomials;

    [[nodiscard]] double operator()(double x) const { return eval(x, 0); }
    [[nodiscard]] double d1(double x) const { return eval(x, 1); }
    [[nodiscard]] double d2(double x) const { return eval(x, 2); }
    [[nodiscard]] bool is_polynomial() const { return !monomials.empty(); }
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// T_k(x) or U_k(x) by the three-term recurrence; valid for any real x.
[[nodiscard]] inline double eval_cheb(Basis kind, int k, double x) {
    if (k < 0) throw std::invalid_argument("eval_cheb: negative degree");
    double p0 = 1.0;
    if (k == 0) return p0;
    double p1 = (kind == Basis::T) ? x : 2.0 * x;
    for (int j = 1; j < k; ++j) {
        double p2 = 2.0 * x * p1 - p0;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

/// Clenshaw summation of a series at x, in its own basis.
[[nodiscard]] inline double clenshaw(const std::vector<double>& c, Basis basis, double x) {
    if (c.empty()) return 0.0;
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
        double b0 = c[k] + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    // T: c0 + x b1 - b2 ; U: c0 + 2x b1 - b2
    return basis == Basis::T ? c[0] + x * b1 - b2 : c[0] + 2.0 * x * b1 - b2;
}

[[nodiscard]] inline double eval_series(const ChebSeries& s, double x) {
    return clenshaw(s.coeffs, s.basis, x);
}

/// U-basis coefficients of a T-basis series, using T_0 = U_0, T_1 = U_1/2, T_k = (U_k - U_{k-2})/2.
[[nodiscard]] inline ChebSeries t_to_u(const ChebSeries& t) {
    ChebSeries u{Basis::U, std::vector<double>(t.coeffs.size(), 0.0)};
    for (std::size_t k = 0; k < t.coeffs.size(); ++k) {
        double a = t.coeffs[k];
        if (k == 0) {
            u.coeffs[0] += a;
        } else if (k == 1) {
            u.coeffs[1] += 0.5 * a;
        } else {
            u.coeffs[k] += 0.5 * a;
            u.coeffs[k - 2] -= 0.5 * a;
        }
    }
    return u;
}

/// T-basis coefficients of a U-basis series: U_{2m} = T_0 + 2 sum_{j<=m} T_{2j}, U_{2m+1} = 2 sum_{j<=m} T_{2j+1}.
[[nodiscard]] inline ChebSeries u_to_t(const ChebSeries& u) {
    const std::size_t n = u.coeffs.size();
    ChebSeries t{Basis::T, std::vector<double>(n, 0.0)};
    // Suffix sums over same-parity indices avoid the quadratic double loop.
    double even = 0.0, odd = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        if (k % 2 == 0) {
            even += u.coeffs[k];
            t.coeffs[k] = (k == 0) ? even : 2.0 * even;
        } else {
            odd += u.coeffs[k];
            t.coeffs[k] = 2.0 * odd;
        }
    }
    return t;
}

/// Derivative of a T-series as a U-series: T_k' = k U_{k-1}.
[[nodiscard]] inline ChebSeries derivative_u(const ChebSeries& t) {
    if (t.basis != Basis::T) throw std::invalid_argument("derivative_u expects a T-series");
    ChebSeries u{Basis::U, {}};
    if (t.coeffs.size() <= 1) {
        u.coeffs = {0.0};
        return u;
    }
    u.coeffs.resize(t.coeffs.size() - 1);
    for (std::size_t k = 1; k < t.coeffs.size(); ++k) u.coeffs[k - 1] = static_cast<double>(k) * t.coeffs[k];
    return u;
}

/// Derivative of a T-series, returned in the T-basis.
[[nodiscard]] inline ChebSeries derivative(const ChebSeries& s) {
    if (s.basis == Basis::T) return u_to_t(derivative_u(s));
    return u_to_t(derivative_u(u_to_t(s)));
}

enum class Measure { Arcsine, Semicircle };

/// Gauss rule against the arcsine law or the semicircle law on (-1,1).
struct QuadratureRule {
    Measure kind = Measure::Arcsine;
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// K-node Gauss-Chebyshev rule, exact for polynomials of degree <= 2K-1. Nodes ascending.
[[nodiscard]] inline QuadratureRule quad_rule(Measure kind, int K) {
    if (K < 1) throw std::invalid_argument("quad_rule: node count must be positive");
    QuadratureRule q{kind, std::vector<double>(K), std::vector<double>(K)};
    for (int j = 1; j <= K; ++j) {
        const int i = K - j;  // reverse so nodes increase
        if (kind == Measure::Arcsine) {
            double th = (2.0 * j - 1.0) * pi / (2.0 * K);
            q.nodes[i] = std::cos(th);
            q.weights[i] = 1.0 / K;
        } else {
            double th = j * pi / (K + 1.0);
            double s = std::sin(th);
            q.nodes[i] = std::cos(th);
            q.weights[i] = 2.0 / (K + 1.0) * s * s;
        }
    }
    return q;
}

/// T-coefficients f_0 = ∫f dϱ, f_k = 2∫f T_k dϱ, for k <= K, using 2K+1 arcsine nodes.
[[nodiscard]] inline ChebSeries cheb_coeffs(const std::function<double(double)>& f, int K) {
    if (K < 1) throw std::invalid_argument("cheb_coeffs: truncation must be positive");
    const int n = 2 * K + 1;
    std::vector<double> th(n), fv(n);
    for (int j = 0; j < n; ++j) {
        th[j] = (2.0 * j + 1.0) * pi / (2.0 * n);
        fv[j] = f(std::cos(th[j]));
        if (!std::isfinite(fv[j]))
            throw NumericalError("cheb_coeffs: non-finite value at x = " + std::to_string(std::cos(th[j])));
    }
    ChebSeries s{Basis::T, std::vector<double>(K + 1, 0.0)};
    for (int k = 0; k <= K; ++k) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += fv[j] * std::cos(k * th[j]);
        s.coeffs[k] = (k == 0 ? 1.0 : 2.0) * acc / n;
    }
    return s;
}

[[nodiscard]] inline ChebSeries cheb_coeffs(const TestFunction& f, int K) {
    return cheb_coeffs([&](double x) { return f(x); }, K);
}

/// (f(x)-f(y))/(x-y), switching to the derivative near the diagonal.
[[nodiscard]] inline double divided_difference(double fx, double fy, double x, double y, double dfx, double dfy) {
    const double scale = std::max({1.0, std::abs(x), std::abs(y)});
    if (std::abs(x - y) < 1e-7 * scale) return 0.5 * (dfx + dfy);
    return (fx - fy) / (x - y);
}

/// U_x(g) = Σ_{k>=1} g_k U_{k-1}(x) for a zero-mean T-series g.
[[nodiscard]] inline double finite_hilbert(const ChebSeries& g, double x) {
    if (g.basis != Basis::T) throw std::invalid_argument("finite_hilbert expects a T-series");
    if (!(std::abs(x) < 1.0)) throw std::domain_error("finite_hilbert: |x| must be < 1");
    if (g.coeffs.size() <= 1) return 0.0;
    std::vector<double> shifted(g.coeffs.begin() + 1, g.coeffs.end());
    return clenshaw(shifted, Basis::U, x);
}

/// The U-series of U(g): coefficient of U_{k-1} is g_k.
[[nodiscard]] inline ChebSeries finite_hilbert_series(const ChebSeries& g) {
    if (g.basis != Basis::T) throw std::invalid_argument("finite_hilbert_series expects a T-series");
    ChebSeries u{Basis::U, {}};
    if (g.coeffs.size() <= 1) {
        u.coeffs = {0.0};
        return u;
    }
    u.coeffs.assign(g.coeffs.begin() + 1, g.coeffs.end());
    return u;
}

/// Divided-difference form ∫(f(t)-f(x))/(t-x) ϱ(dt) by an n-node arcsine rule.
[[nodiscard]] inline double finite_hilbert_quad(const TestFunction& f, double x, int n) {
    const auto q = quad_rule(Measure::Arcsine, n);
    const double fx = f(x), dfx = f.d1(x);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        const double t = q.nodes[j];
        const double ft = f(t);
        const bool near = std::abs(t - x) < 1e-7 * std::max(1.0, std::abs(x));
        acc += q.weights[j] * (near ? dfx : (ft - fx) / (t - x));
    }
    return acc;
}

/// H_x(μ_sc) = ∫μ_sc(dy)/(x-y): 2x on [-1,1], odd continuation 2(x - sign(x)√(x²-1)) outside.
[[nodiscard]] inline double hilbert_semicircle(double x) {
    if (std::abs(x) <= 1.0) return 2.0 * x;
    const double r = std::sqrt(x * x - 1.0);
    // x - sign(x) r = 1/(x + sign(x) r), computed without cancellation.
    return 2.0 / (x + std::copysign(r, x));
}

/// H_x(Σ u_j U_j μ_sc). On [-1,1] this is 2Σ u_j T_{j+1}(x); outside it is 2Σ u_j w^{j+1} with
/// w = 1/(x + sign(x)√(x²-1)).
[[nodiscard]] inline double hilbert_weighted_semicircle(const ChebSeries& u, double x) {
    if (u.basis != Basis::U) throw std::invalid_argument("hilbert_weighted_semicircle expects a U-series");
    if (std::abs(x) <= 1.0) {
        std::vector<double> t(u.coeffs.size() + 1, 0.0);
        for (std::size_t j = 0; j < u.coeffs.size(); ++j) t[j + 1] = 2.0 * u.coeffs[j];
        return clenshaw(t, Basis::T, x);
    }
    const double w = 1.0 / (x + std::copysign(std::sqrt(x * x - 1.0), x));
    double acc = 0.0, p = w;
    for (double c : u.coeffs) {
        acc += c * p;
        p *= w;
    }
    return 2.0 * acc;
}

/// Tricomi inversion φ = ½H(uμ_sc): the coefficient of U_{k-1} becomes the coefficient of T_k.
[[nodiscard]] inline ChebSeries tricomi_invert(const ChebSeries& u) {
    if (u.basis != Basis::U) throw std::invalid_argument("tricomi_invert expects a U-series");
    ChebSeries t{Basis::T, std::vector<double>(u.coeffs.size() + 1, 0.0)};
    for (std::size_t k = 0; k < u.coeffs.size(); ++k) t.coeffs[k + 1] = u.coeffs[k];
    return t;
}

/// ¼Σ k f_k² over a T-series.
[[nodiscard]] inline double sigma_from_series(const ChebSeries& s) {
    double acc = 0.0;
    for (std::size_t k = 1; k < s.coeffs.size(); ++k) acc += static_cast<double>(k) * s.coeffs[k] * s.coeffs[k];
    return 0.25 * acc;
}

/// Partial sums ¼Σ_{k<=m} k f_k², m = 0..K.
[[nodiscard]] inline std::vector<double> sigma_partial_sums(const ChebSeries& s) {
    std::vector<double> out(s.coeffs.size(), 0.0);
    double acc = 0.0;
    for (std::size_t k = 1; k < s.coeffs.size(); ++k) {
        acc += 0.25 * static_cast<double>(k) * s.coeffs[k] * s.coeffs[k];
        out[k] = acc;
    }
    return out;
}

enum class SigmaMethod { Fourier, DoubleIntegral, HilbertPairing };

namespace detail {

inline double sigma_fourier(const TestFunction& f, int K) { return sigma_from_series(cheb_coeffs(f, K)); }

// ¼∬((f(x)-f(y))/(x-y))²(1-xy) ϱ(dx)ϱ(dy) on an n×n arcsine product rule.
inline double sigma_double(const TestFunction& f, int n) {
    const auto q = quad_rule(Measure::Arcsine, n);
    std::vector<double> fv(n), dv(n);
    for (int i = 0; i < n; ++i) {
        fv[i] = f(q.nodes[i]);
        dv[i] = f.d1(q.nodes[i]);
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double xi = q.nodes[i];
        acc += dv[i] * dv[i] * (1.0 - xi * xi);
        double row = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double xj = q.nodes[j];
            const double dd = divided_difference(fv[i], fv[j], xi, xj, dv[i], dv[j]);
            row += dd * dd * (1.0 - xi * xj);
        }
        acc += 2.0 * row;
    }
    return 0.25 * acc / (static_cast<double>(n) * n);
}

// ¼∫ f'(x) U_x(f) μ_sc(dx), outer semicircle rule with n nodes, inner arcsine rule with m nodes.
inline double sigma_pairing(const TestFunction& f, int n, int m) {
    const auto qo = quad_rule(Measure::Semicircle, n);
    const auto qi = quad_rule(Measure::Arcsine, m);
    std::vector<double> fi(m), di(m);
    for (int j = 0; j < m; ++j) {
        fi[j] = f(qi.nodes[j]);
        di[j] = f.d1(qi.nodes[j]);
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = qo.nodes[i];
        const double fx = f(x), dfx = f.d1(x);
        double u = 0.0;
        for (int j = 0; j < m; ++j) u += divided_difference(fi[j], fx, qi.nodes[j], x, di[j], dfx);
        acc += qo.weights[i] * dfx * (u / m);
    }
    return 0.25 * acc;
}

inline double sigma_once(const TestFunction& f, SigmaMethod method, int K) {
    switch (method) {
        case SigmaMethod::Fourier: return sigma_fourier(f, K);
        case SigmaMethod::DoubleIntegral: return sigma_double(f, 2 * K + 1);
        case SigmaMethod::HilbertPairing: return sigma_pairing(f, 2 * K, 2 * K + 1);
    }
    return 0.0;
}

}  // namespace detail

/// Σ(f) by one of the three equivalent formulas. Throws NumericalError when the value changes
/// by more than `rel_tol` between K and 2K.
[[nodiscard]] inline double sigma_variance(const TestFunction& f, SigmaMethod method, int K, double rel_tol = 1e-6) {
    if (K < 1) throw std::invalid_argument("sigma_variance: truncation must be positive");
    const double a = detail::sigma_once(f, method, K);
    const double b = detail::sigma_once(f, method, 2 * K);
    if (!std::isfinite(a) || !std::isfinite(b)) throw NumericalError("sigma_variance: non-finite quadrature");
    if (std::abs(a - b) > rel_tol * std::max(std::abs(b), 1e-14))
        throw NumericalError("sigma_variance: no convergence between K=" + std::to_string(K) + " and 2K (" +
                             std::to_string(a) + " vs " + std::to_string(b) + ")");
    return std::max(b, 0.0);
}

}  // namespace betaclt
