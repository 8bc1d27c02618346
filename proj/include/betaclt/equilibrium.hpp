#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "betaclt/chebyshev.hpp"
#include "betaclt/potential.hpp"

namespace betaclt {

/// Failure of the one-cut, off-critical assumptions, with the failing check named.
class OneCutError : public std::runtime_error {
public:
    enum class Kind { Mass, OffCriticality, Variational, Evaluation };
    OneCutError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] const char* kind_name() const {
        switch (kind_) {
            case Kind::Mass: return "mass";
            case Kind::OffCriticality: return "off_criticality";
            case Kind::Variational: return "variational";
            case Kind::Evaluation: return "evaluation";
        }
        return "unknown";
    }

private:
    Kind kind_;
};

namespace detail {

inline double density_S_rule(const Potential& V, double x, const QuadratureRule& q) {
    const double vx = V.d1(x), v2x = V.d2(x);
    double acc = 0.0;
    for (std::size_t j = 0; j < q.nodes.size(); ++j) {
        const double y = q.nodes[j];
        acc += q.weights[j] * divided_difference(vx, V.d1(y), x, y, v2x, V.d2(y));
    }
    return 0.5 * acc;
}

}  // namespace detail

/// S(x) = ½∫(V'(x)-V'(y))/(x-y) ϱ(dy); throws NumericalError if the K and 2K rules disagree.
[[nodiscard]] inline double density_S(const Potential& V, double x, int K = 64, double tol = 1e-10) {
    const double a = detail::density_S_rule(V, x, quad_rule(Measure::Arcsine, K));
    const double b = detail::density_S_rule(V, x, quad_rule(Measure::Arcsine, 2 * K));
    if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a - b) > tol * std::max(1.0, std::abs(b)))
        throw NumericalError("density_S: no convergence at x = " + std::to_string(x));
    return b;
}

struct EquilibriumOptions {
    double delta = 0.25;     ///< working margin beyond [-1,1]
    int off_points = 64;     ///< sample points on each side outside the support
    double tol = 1e-8;       ///< mass, variational and Q residual tolerance
    int max_K = 512;
};

/// Equilibrium measure μ_V = S μ_sc on [-1,1] and associated quantities.
struct EquilibriumData {
    Potential V;
    double delta = 0.25;
    ChebSeries S_T;   ///< S in the T-basis
    ChebSeries S_U;   ///< S in the U-basis
    ChebSeries dS_T;  ///< S' in the T-basis
    ChebSeries logker;  ///< T-coefficients of 2(1-y²)S(y), used for the log potential
    std::vector<double> grid_x, grid_S;
    double ell_V = 0.0;
    double min_S = 0.0;
    double mass_residual = 0.0;
    double variational_residual = 0.0;
    double q_residual = 0.0;        ///< sup_J |Q - ℓ_V|
    double min_outside_gap = 0.0;   ///< min (Q - ℓ_V) on the sampled outside points

    [[nodiscard]] double S(double x) const {
        if (std::abs(x) <= 1.0) return eval_series(S_T, x);
        return density_S(V, x);
    }
    [[nodiscard]] double dS(double x) const { return eval_series(dS_T, std::clamp(x, -1.0, 1.0)); }

    /// ∫ log|x-y| μ_V(dy), via the Chebyshev expansion of the logarithmic kernel.
    [[nodiscard]] double log_potential(double x) const {
        const auto& g = logker.coeffs;
        if (std::abs(x) <= 1.0) {
            std::vector<double> t(g.size(), 0.0);
            for (std::size_t k = 1; k < g.size(); ++k) t[k] = g[k] / static_cast<double>(k);
            return -g[0] * std::log(2.0) - clenshaw(t, Basis::T, x);
        }
        const double z = x + std::copysign(std::sqrt(x * x - 1.0), x);
        const double w = 1.0 / z;
        double acc = 0.0, p = 1.0;
        for (std::size_t k = 1; k < g.size(); ++k) {
            p *= w;
            acc += g[k] * p / static_cast<double>(k);
        }
        return g[0] * std::log(std::abs(z) / 2.0) - acc;
    }

    /// Effective potential Q(x) = V(x) - ∫log|x-y| μ_V(dy).
    [[nodiscard]] double Q(double x) const { return V(x) - log_potential(x); }
    /// Q'(x) = V'(x) - H_x(μ_V).
    [[nodiscard]] double dQ(double x) const { return V.d1(x) - hilbert_weighted_semicircle(S_U, x); }

    /// ∫_{-1}^x μ_V, in closed form from the U-coefficients of S.
    [[nodiscard]] double cdf(double x) const {
        if (x <= -1.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return cdf_theta(std::acos(x));
    }
    [[nodiscard]] double cdf_theta(double th) const {
        const auto& s = S_U.coeffs;
        double acc = s[0] * ((pi - th) + 0.5 * std::sin(2.0 * th));
        for (std::size_t j = 1; j < s.size(); ++j) {
            const double jj = static_cast<double>(j);
            acc += s[j] * (-std::sin(jj * th) / jj + std::sin((jj + 2.0) * th) / (jj + 2.0));
        }
        return acc / pi;
    }
};

namespace detail {

// T-series product with T_2: T_k T_2 = (T_{k+2} + T_{|k-2|})/2.
inline ChebSeries times_one_minus_t2(const ChebSeries& s) {
    ChebSeries out{Basis::T, std::vector<double>(s.coeffs.size() + 2, 0.0)};
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
        const double a = s.coeffs[k];
        out.coeffs[k] += a;
        out.coeffs[k + 2] -= 0.5 * a;
        out.coeffs[k >= 2 ? k - 2 : 2 - k] -= 0.5 * a;
    }
    return out;
}

inline ChebSeries series_of_S(const Potential& V, int max_K) {
    for (int K = 32; K <= max_K; K *= 2) {
        auto s = cheb_coeffs([&](double x) { return density_S(V, x); }, K);
        double tail = 0.0, top = 0.0;
        for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
            top = std::max(top, std::abs(s.coeffs[k]));
            if (k + 4 >= s.coeffs.size()) tail = std::max(tail, std::abs(s.coeffs[k]));
        }
        if (tail <= 1e-14 * std::max(top, 1.0)) {
            // Drop coefficients that are pure rounding noise.
            std::size_t last = s.coeffs.size();
            while (last > 1 && std::abs(s.coeffs[last - 1]) <= 1e-16 * std::max(top, 1.0)) --last;
            s.coeffs.resize(last);
            return s;
        }
    }
    throw NumericalError("equilibrium: Chebyshev series of S did not converge by K = " + std::to_string(max_K));
}

}  // namespace detail

/// Computes S, checks mass, positivity on [-1,1], the variational identity H(μ_V) = V' on J and the
/// strict inequality of Q outside J. Throws OneCutError naming the failed check.
[[nodiscard]] inline EquilibriumData verify_one_cut(const Potential& V, const EquilibriumOptions& opt = {}) {
    EquilibriumData eq;
    eq.V = V;
    eq.delta = opt.delta;

    for (int i = 0; i <= 64; ++i) {
        const double x = -1.0 - opt.delta + (2.0 + 2.0 * opt.delta) * i / 64.0;
        for (int r = 0; r <= 2; ++r)
            if (!std::isfinite(V.d(x, r)))
                throw OneCutError(OneCutError::Kind::Evaluation, "potential not finite at x = " + std::to_string(x));
    }

    eq.S_T = detail::series_of_S(V, opt.max_K);
    eq.S_U = t_to_u(eq.S_T);
    eq.dS_T = derivative(eq.S_T);
    eq.logker = detail::times_one_minus_t2(eq.S_T);

    {
        const int n = static_cast<int>(eq.S_T.coeffs.size()) + 8;
        const auto q = quad_rule(Measure::Semicircle, n);
        double mass = 0.0;
        for (int j = 0; j < n; ++j) mass += q.weights[j] * eval_series(eq.S_T, q.nodes[j]);
        eq.mass_residual = std::abs(mass - 1.0);
        if (!(eq.mass_residual <= opt.tol))
            throw OneCutError(OneCutError::Kind::Mass,
                              "mass of S μ_sc is " + std::to_string(mass) + ", expected 1 (normalize the potential)");
    }

    eq.min_S = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2000; ++i) eq.min_S = std::min(eq.min_S, eval_series(eq.S_T, std::cos(pi * i / 2000.0)));
    if (!(eq.min_S > 0.0))
        throw OneCutError(OneCutError::Kind::OffCriticality, "min of S on [-1,1] is " + std::to_string(eq.min_S));

    eq.ell_V = eq.Q(0.0);
    for (int i = 0; i < 200; ++i) {
        const double x = std::cos(pi * (i + 0.5) / 200.0);
        eq.variational_residual = std::max(eq.variational_residual, std::abs(hilbert_weighted_semicircle(eq.S_U, x) - V.d1(x)));
        eq.q_residual = std::max(eq.q_residual, std::abs(eq.Q(x) - eq.ell_V));
    }
    if (!(eq.variational_residual <= opt.tol))
        throw OneCutError(OneCutError::Kind::Variational,
                          "sup_J |H(mu_V) - V'| = " + std::to_string(eq.variational_residual));
    if (!(eq.q_residual <= opt.tol))
        throw OneCutError(OneCutError::Kind::Variational, "sup_J |Q - ell_V| = " + std::to_string(eq.q_residual));

    eq.min_outside_gap = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= opt.off_points; ++i) {
        const double h = opt.delta * i / opt.off_points;
        for (double x : {1.0 + h, -1.0 - h}) {
            const double slope = std::copysign(1.0, x) * eq.dQ(x);
            const double gap = eq.Q(x) - eq.ell_V;
            eq.min_outside_gap = std::min(eq.min_outside_gap, gap);
            if (!(slope > 0.0) || gap < -opt.tol)
                throw OneCutError(OneCutError::Kind::Variational,
                                  "effective potential not increasing away from the support at x = " + std::to_string(x));
        }
    }

    const int ng = 129;
    eq.grid_x.resize(ng);
    eq.grid_S.resize(ng);
    for (int i = 0; i < ng; ++i) {
        const double t = std::cos(pi * (ng - 1 - i) / (ng - 1.0));
        eq.grid_x[i] = t * (1.0 + opt.delta);
        eq.grid_S[i] = eq.S(eq.grid_x[i]);
    }
    return eq;
}

struct NormalizedPotential {
    Potential W;
    double c = 0.0;
    double r = 1.0;
    int iterations = 0;
};

namespace detail {

struct NormalizeEval {
    double g1, f2;             // ∫raw'(c+rx)dϱ and r∫x raw'(c+rx)dϱ - 1
    double j11, j12, j21, j22;
};

inline NormalizeEval normalize_eval(const Potential& raw, double c, double r, const QuadratureRule& q) {
    double m0 = 0, m1 = 0, h0 = 0, h1 = 0, h2 = 0;
    for (std::size_t j = 0; j < q.nodes.size(); ++j) {
        const double x = q.nodes[j], w = q.weights[j];
        const double v1 = raw.d1(c + r * x), v2 = raw.d2(c + r * x);
        m0 += w * v1;
        m1 += w * x * v1;
        h0 += w * v2;
        h1 += w * x * v2;
        h2 += w * x * x * v2;
    }
    return {m0, r * m1 - 1.0, h0, h1, r * h1, m1 + r * h2};
}

}  // namespace detail

/// Finds W(x) = raw(c + r x) with ∫W' dϱ = 0 and ∫S_W dμ_sc = 1. Damped Newton, bisection fallback.
[[nodiscard]] inline NormalizedPotential normalize_potential(const Potential& raw, double tol = 1e-10, int max_iter = 200) {
    const auto q = quad_rule(Measure::Arcsine, 96);
    auto residual = [&](double c, double r) {
        auto e = detail::normalize_eval(raw, c, r, q);
        return std::hypot(r * e.g1, e.f2);
    };
    double c = 0.0, r = 1.0;
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        auto e = detail::normalize_eval(raw, c, r, q);
        const double res = std::hypot(r * e.g1, e.f2);
        if (std::abs(r * e.g1) <= tol && std::abs(e.f2) <= tol) {
            converged = true;
            break;
        }
        const double det = e.j11 * e.j22 - e.j12 * e.j21;
        if (!std::isfinite(det) || det == 0.0) break;
        const double dc = -(e.j22 * e.g1 - e.j12 * e.f2) / det;
        const double dr = -(-e.j21 * e.g1 + e.j11 * e.f2) / det;
        double lam = 1.0;
        bool moved = false;
        for (int h = 0; h < 40; ++h, lam *= 0.5) {
            const double cn = c + lam * dc, rn = r + lam * dr;
            if (rn > 0.0 && residual(cn, rn) < res) {
                c = cn;
                r = rn;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }

    if (!converged) {
        // Nested bisection: c(r) zeroes the centering condition, then r zeroes the mass condition.
        auto center = [&](double rr) {
            auto g = [&](double cc) { return detail::normalize_eval(raw, cc, rr, q).g1; };
            double lo = -1.0, hi = 1.0;
            int grow = 0;
            while (g(lo) > 0.0 && grow++ < 60) lo *= 2.0;
            grow = 0;
            while (g(hi) < 0.0 && grow++ < 60) hi *= 2.0;
            if (g(lo) > 0.0 || g(hi) < 0.0) throw NumericalError("normalize_potential: cannot bracket the center");
            for (int i = 0; i < max_iter && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
                const double mid = 0.5 * (lo + hi);
                (g(mid) > 0.0 ? hi : lo) = mid;
            }
            return 0.5 * (lo + hi);
        };
        auto mass = [&](double rr) { return detail::normalize_eval(raw, center(rr), rr, q).f2; };
        double lo = 1.0, hi = 1.0;
        int grow = 0;
        while (mass(lo) > 0.0 && grow++ < 60) lo *= 0.5;
        grow = 0;
        while (mass(hi) < 0.0 && grow++ < 60) hi *= 2.0;
        if (mass(lo) > 0.0 || mass(hi) < 0.0) throw NumericalError("normalize_potential: non-bracketable r");
        for (it = 0; it < max_iter && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mass(mid) > 0.0 ? hi : lo) = mid;
        }
        r = 0.5 * (lo + hi);
        c = center(r);
        auto e = detail::normalize_eval(raw, c, r, q);
        if (std::abs(r * e.g1) > tol || std::abs(e.f2) > tol)
            throw NumericalError("normalize_potential: root finder did not converge");
    }
    NormalizedPotential out;
    out.W = affine_potential(raw, c, r);
    out.c = c;
    out.r = r;
    out.iterations = it;
    return out;
}

/// ρ_0..ρ_N with ∫_{-1}^{ρ_j} μ_V = j/N; ρ_0 = -1 and ρ_N = 1 exactly.
[[nodiscard]] inline std::vector<double> classical_locations(const EquilibriumData& eq, int N) {
    if (N < 1) throw std::invalid_argument("classical_locations: N must be positive");
    std::vector<double> rho(N + 1);
    rho[0] = -1.0;
    rho[N] = 1.0;
    for (int j = 1; j < N; ++j) {
        const double target = static_cast<double>(j) / N;
        // F(θ) decreases from 1 at θ = 0 to 0 at θ = π.
        double lo = 0.0, hi = pi;
        double th = pi * (1.0 - target);
        for (int it = 0; it < 200; ++it) {
            const double F = eq.cdf_theta(th) - target;
            if (std::abs(F) <= 1e-15) break;
            (F > 0.0 ? lo : hi) = th;
            const double s = std::sin(th);
            const double dF = -(2.0 / pi) * eq.S(std::cos(th)) * s * s;
            double next = th - F / dF;
            if (!(next > lo && next < hi) || dF == 0.0) next = 0.5 * (lo + hi);
            if (std::abs(next - th) <= 1e-16) {
                th = next;
                break;
            }
            th = next;
        }
        rho[j] = std::cos(th);
    }
    for (int j = 1; j <= N; ++j)
        if (!(rho[j] > rho[j - 1])) throw NumericalError("classical_locations: lost monotonicity at j = " + std::to_string(j));
    return rho;
}

/// ∫ f dμ_V by an n-node semicircle rule.
[[nodiscard]] inline double mu_integral(const TestFunction& f, const EquilibriumData& eq, int n = 512) {
    const auto q = quad_rule(Measure::Semicircle, n);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += q.weights[j] * f(q.nodes[j]) * eq.S(q.nodes[j]);
    return acc;
}

/// ∫ f dϱ by an n-node arcsine rule.
[[nodiscard]] inline double arcsine_integral(const TestFunction& f, int n = 512) {
    const auto q = quad_rule(Measure::Arcsine, n);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += f(q.nodes[j]);
    return acc / n;
}

namespace detail {

inline double mean_m_rule(const TestFunction& f, const EquilibriumData& eq, int n, int m) {
    const auto qo = quad_rule(Measure::Semicircle, n);
    const auto qi = quad_rule(Measure::Arcsine, m);
    std::vector<double> fi(m), di(m);
    double avg = 0.0;
    for (int j = 0; j < m; ++j) {
        fi[j] = f(qi.nodes[j]);
        di[j] = f.d1(qi.nodes[j]);
        avg += fi[j];
    }
    avg /= m;
    double corr = 0.0;
    bool flat = true;
    for (double c : eq.dS_T.coeffs) flat = flat && c == 0.0;
    if (!flat) {
        for (int i = 0; i < n; ++i) {
            const double x = qo.nodes[i];
            const double fx = f(x), dfx = f.d1(x);
            double u = 0.0;
            for (int j = 0; j < m; ++j) u += divided_difference(fx, fi[j], x, qi.nodes[j], dfx, di[j]);
            corr += qo.weights[i] * (eq.dS(x) / eq.S(x)) * (u / m);
        }
    }
    return 0.5 * (f(1.0) + f(-1.0) - 2.0 * avg - corr);
}

}  // namespace detail

/// Limiting mean functional 𝐦(f) = ½(f(1) + f(-1) - 2∫f dϱ - ∫(S'/S)(x) ∫(f(x)-f(y))/(x-y) ϱ(dy) μ_sc(dx)).
[[nodiscard]] inline double mean_m(const TestFunction& f, const EquilibriumData& eq, int n = 256, double tol = 1e-8) {
    const double a = detail::mean_m_rule(f, eq, n, n + 1);
    const double b = detail::mean_m_rule(f, eq, 2 * n, 2 * n + 1);
    if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a - b) > tol * std::max(1.0, std::abs(b)))
        throw NumericalError("mean_m: nested quadrature did not converge for " + f.name);
    return b;
}

}  // namespace betaclt
