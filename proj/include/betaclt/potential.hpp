#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "betaclt/chebyshev.hpp"

namespace betaclt {

/// r-th derivative of Σ c_m x^m by Horner.
[[nodiscard]] inline double poly_eval(const std::vector<double>& c, double x, int r = 0) {
    double acc = 0.0;
    for (std::size_t m = c.size(); m-- > static_cast<std::size_t>(r);) {
        double fall = 1.0;
        for (int i = 0; i < r; ++i) fall *= static_cast<double>(m - i);
        acc = acc * x + fall * c[m];
    }
    return acc;
}

[[nodiscard]] inline std::vector<double> poly_derivative(const std::vector<double>& c) {
    if (c.size() <= 1) return {0.0};
    std::vector<double> d(c.size() - 1);
    for (std::size_t m = 1; m < c.size(); ++m) d[m - 1] = static_cast<double>(m) * c[m];
    return d;
}

/// Monomial coefficients of T_k.
[[nodiscard]] inline std::vector<double> chebyshev_monomials(int k) {
    std::vector<double> p0{1.0}, p1{0.0, 1.0};
    if (k == 0) return p0;
    for (int j = 1; j < k; ++j) {
        std::vector<double> p2(p1.size() + 1, 0.0);
        for (std::size_t m = 0; m < p1.size(); ++m) p2[m + 1] += 2.0 * p1[m];
        for (std::size_t m = 0; m < p0.size(); ++m) p2[m] -= p0[m];
        p0 = std::move(p1);
        p1 = std::move(p2);
    }
    return p1;
}

/// Confining potential with derivatives up to order 4. `d(x, r)` returns V^{(r)}(x).
struct Potential {
    std::string name;
    std::function<double(double, int)> d;
    int kappa = 5;
    /// Monomial coefficients when V is a polynomial.
    std::vector<double> monomials;
    /// W(x) = raw(c + r x) when produced by normalization.
    double shift = 0.0;
    double scale = 1.0;

    [[nodiscard]] double operator()(double x) const { return d(x, 0); }
    [[nodiscard]] double d1(double x) const { return d(x, 1); }
    [[nodiscard]] double d2(double x) const { return d(x, 2); }
};

[[nodiscard]] inline Potential polynomial_potential(std::string name, std::vector<double> c) {
    Potential V;
    V.name = std::move(name);
    V.kappa = 1000;
    V.monomials = c;
    V.d = [c = std::move(c)](double x, int r) { return poly_eval(c, x, r); };
    return V;
}

[[nodiscard]] inline Potential gaussian_potential() { return polynomial_potential("gaussian", {0.0, 0.0, 1.0}); }

/// Monomial coefficients of p(c + r x).
[[nodiscard]] inline std::vector<double> poly_affine(const std::vector<double>& p, double c, double r) {
    std::vector<double> out(p.size(), 0.0);
    // (c + r x)^m expanded by the binomial theorem.
    for (std::size_t m = 0; m < p.size(); ++m) {
        double binom = 1.0;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i > 0) binom = binom * static_cast<double>(m - i + 1) / static_cast<double>(i);
            out[i] += p[m] * binom * std::pow(c, static_cast<double>(m - i)) * std::pow(r, static_cast<double>(i));
        }
    }
    return out;
}

/// W(x) = V(c + r x).
[[nodiscard]] inline Potential affine_potential(const Potential& raw, double c, double r) {
    Potential W;
    W.name = raw.name;
    W.kappa = raw.kappa;
    W.shift = raw.shift + raw.scale * c;
    W.scale = raw.scale * r;
    if (!raw.monomials.empty()) {
        W.monomials = poly_affine(raw.monomials, c, r);
        W.d = [m = W.monomials](double x, int k) { return poly_eval(m, x, k); };
    } else {
        W.d = [f = raw.d, c, r](double x, int k) { return std::pow(r, k) * f(c + r * x, k); };
    }
    return W;
}

namespace fn {

[[nodiscard]] inline TestFunction polynomial(std::string name, std::vector<double> c) {
    TestFunction f;
    f.name = std::move(name);
    f.smoothness = 1000;
    f.monomials = c;
    f.eval = [c = std::move(c)](double x, int r) { return poly_eval(c, x, r); };
    return f;
}

/// Polynomial given by T-coefficients; evaluated by Clenshaw, which stays stable at high degree.
[[nodiscard]] inline TestFunction chebyshev_series(std::string name, const ChebSeries& t) {
    std::vector<ChebSeries> ders{t};
    for (int r = 1; r <= 4; ++r) ders.push_back(derivative(ders.back()));
    TestFunction f;
    f.name = std::move(name);
    f.smoothness = 1000;
    f.eval = [ders = std::move(ders)](double x, int r) { return r <= 4 ? eval_series(ders[r], x) : 0.0; };
    // Monomials are only exact enough for the power-sum paths at modest degree.
    if (t.coeffs.size() <= 13) {
        f.monomials.assign(t.coeffs.size(), 0.0);
        for (std::size_t k = 0; k < t.coeffs.size(); ++k) {
            auto m = chebyshev_monomials(static_cast<int>(k));
            for (std::size_t i = 0; i < m.size(); ++i) f.monomials[i] += t.coeffs[k] * m[i];
        }
    }
    return f;
}

[[nodiscard]] inline TestFunction chebyshev_t(int k) {
    ChebSeries t{Basis::T, std::vector<double>(k + 1, 0.0)};
    t.coeffs[k] = 1.0;
    return chebyshev_series("T(" + std::to_string(k) + ")", t);
}

[[nodiscard]] inline TestFunction constant(double a) { return polynomial("const(" + std::to_string(a) + ")", {a}); }

/// e^{a x}
[[nodiscard]] inline TestFunction exponential(double a) {
    TestFunction f;
    f.name = "exp(" + std::to_string(a) + ")";
    f.smoothness = 1000;
    f.eval = [a](double x, int r) { return std::pow(a, r) * std::exp(a * x); };
    return f;
}

/// sin(a x)
[[nodiscard]] inline TestFunction sine(double a) {
    TestFunction f;
    f.name = "sin(" + std::to_string(a) + ")";
    f.smoothness = 1000;
    f.eval = [a](double x, int r) {
        const double p = std::pow(a, r);
        switch (r % 4) {
            case 0: return p * std::sin(a * x);
            case 1: return p * std::cos(a * x);
            case 2: return -p * std::sin(a * x);
            default: return -p * std::cos(a * x);
        }
    };
    return f;
}

/// cos(a x)
[[nodiscard]] inline TestFunction cosine(double a) {
    TestFunction f;
    f.name = "cos(" + std::to_string(a) + ")";
    f.smoothness = 1000;
    f.eval = [a](double x, int r) {
        const double p = std::pow(a, r);
        switch (r % 4) {
            case 0: return p * std::cos(a * x);
            case 1: return -p * std::sin(a * x);
            case 2: return -p * std::cos(a * x);
            default: return p * std::sin(a * x);
        }
    };
    return f;
}

/// α f + γ g
[[nodiscard]] inline TestFunction combine(double alpha, const TestFunction& f, double gamma, const TestFunction& g) {
    TestFunction h;
    h.name = std::to_string(alpha) + "*" + f.name + "+" + std::to_string(gamma) + "*" + g.name;
    h.smoothness = std::min(f.smoothness, g.smoothness);
    h.eval = [alpha, gamma, fe = f.eval, ge = g.eval](double x, int r) { return alpha * fe(x, r) + gamma * ge(x, r); };
    if (f.is_polynomial() && g.is_polynomial()) {
        h.monomials.assign(std::max(f.monomials.size(), g.monomials.size()), 0.0);
        for (std::size_t m = 0; m < f.monomials.size(); ++m) h.monomials[m] += alpha * f.monomials[m];
        for (std::size_t m = 0; m < g.monomials.size(); ++m) h.monomials[m] += gamma * g.monomials[m];
    }
    return h;
}

}  // namespace fn

}  // namespace betaclt
