#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "betaclt/chebyshev.hpp"
#include "betaclt/equilibrium.hpp"

namespace betaclt {

class EigenbasisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Truncated Taylor series c_0 + c_1 h + … + c_4 h⁴, enough to carry four derivatives.
struct Jet {
    static constexpr int n = 5;
    std::array<double, n> c{};

    static Jet constant(double v) {
        Jet j;
        j.c[0] = v;
        return j;
    }
    static Jet variable(double v, double slope = 1.0) {
        Jet j;
        j.c[0] = v;
        j.c[1] = slope;
        return j;
    }
    /// r-th derivative.
    [[nodiscard]] double d(int r) const {
        double f = 1.0;
        for (int i = 2; i <= r; ++i) f *= i;
        return f * c[r];
    }
};

inline Jet operator+(Jet a, const Jet& b) {
    for (int i = 0; i < Jet::n; ++i) a.c[i] += b.c[i];
    return a;
}
inline Jet operator-(Jet a, const Jet& b) {
    for (int i = 0; i < Jet::n; ++i) a.c[i] -= b.c[i];
    return a;
}
inline Jet operator*(double s, Jet a) {
    for (auto& v : a.c) v *= s;
    return a;
}
inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i < Jet::n; ++i)
        for (int k = 0; k <= i; ++k) r.c[i] += a.c[k] * b.c[i - k];
    return r;
}
inline Jet reciprocal(const Jet& a) {
    Jet r;
    r.c[0] = 1.0 / a.c[0];
    for (int i = 1; i < Jet::n; ++i) {
        double s = 0.0;
        for (int k = 1; k <= i; ++k) s += a.c[k] * r.c[i - k];
        r.c[i] = -s / a.c[0];
    }
    return r;
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet exp(const Jet& a) {
    Jet r;
    r.c[0] = std::exp(a.c[0]);
    for (int i = 1; i < Jet::n; ++i) {
        double s = 0.0;
        for (int k = 1; k <= i; ++k) s += k * a.c[k] * r.c[i - k];
        r.c[i] = s / i;
    }
    return r;
}

/// exp(-1/a) for a > 0, zero (with all derivatives) otherwise.
inline Jet flat_exp(const Jet& a) {
    if (a.c[0] <= 0.0) return Jet{};
    return exp(-1.0 * reciprocal(a));
}

/// C^∞ step: 1 with all derivatives flat at u = 0, 0 with all derivatives flat at u = 1.
inline Jet smooth_step(const Jet& u) {
    if (u.c[0] <= 0.0) return Jet::constant(1.0);
    if (u.c[0] >= 1.0) return Jet{};
    const Jet a = flat_exp(Jet::constant(1.0) - u), b = flat_exp(u);
    return a / (a + b);
}

}  // namespace detail

struct EigenbasisOptions {
    double eta = 32.0 / 9.0;  ///< ε_n = min(δ, σ_n^{-η}); the default is 4(κ+1)/(2κ-1) at κ = 5
    double delta = 0.25;
    int kappa = 5;
};

struct EigenBasis {
    int K = 0;
    int d = 0;
    std::vector<double> sigma;    ///< σ_1 < … < σ_d
    Eigen::MatrixXd C;            ///< K×d; row k-1 holds the coefficient of T_k
    Eigen::MatrixXd G;            ///< K×K Gram matrix of ⟨·,·⟩_{μV} on T_1..T_K
    double eta = 32.0 / 9.0;
    double delta = 0.25;
    int kappa = 5;
    std::vector<double> eps;      ///< extension half-widths ε_n
    /// φ_n series on [-1,1] and its first four derivatives (T-basis).
    std::vector<std::array<ChebSeries, 5>> series;

    /// T-series of φ_n (n is 1-based).
    [[nodiscard]] const ChebSeries& phi_series(int n) const { return series.at(n - 1)[0]; }
};

/// G_{jk} = jk ∫ U_{j-1}U_{k-1} S dμ_sc by an n-node semicircle rule with n ≥ 2K.
[[nodiscard]] inline Eigen::MatrixXd gram_matrix(const EquilibriumData& eq, int K, int nodes = 0) {
    if (K < 4) throw std::invalid_argument("gram_matrix: K must be at least 4");
    const int n = std::max(nodes, 2 * K + static_cast<int>(eq.S_T.coeffs.size()));
    const auto q = quad_rule(Measure::Semicircle, n);
    Eigen::MatrixXd B(n, K);
    for (int i = 0; i < n; ++i) {
        const double th = std::acos(q.nodes[i]), s = std::sin(th);
        const double w = std::sqrt(q.weights[i] * eq.S(q.nodes[i]));
        for (int k = 0; k < K; ++k) B(i, k) = w * (k + 1) * std::sin((k + 1) * th) / s;
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K, K);
    G.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    if (Eigen::LLT<Eigen::MatrixXd>(G).info() != Eigen::Success)
        throw EigenbasisError("gram_matrix: G is not positive definite; S is not a valid density");
    return G;
}

/// Solves D c = (2/σ) G c through the symmetric matrix D^{-1/2} G D^{-1/2}, whose eigenvalues are σ/2.
[[nodiscard]] inline EigenBasis solve_eigenbasis(const Eigen::MatrixXd& G, int d, const EigenbasisOptions& opt = {}) {
    const int K = static_cast<int>(G.rows());
    if (G.cols() != K) throw std::invalid_argument("solve_eigenbasis: G must be square");
    if (d < 1 || 4 * d > K) throw EigenbasisError("solve_eigenbasis: need 1 <= d <= K/4 (d = " + std::to_string(d) + ", K = " + std::to_string(K) + ")");
    Eigen::VectorXd rs(K);
    for (int k = 0; k < K; ++k) rs[k] = 1.0 / std::sqrt(static_cast<double>(k + 1));
    const Eigen::MatrixXd M = rs.asDiagonal() * G * rs.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw EigenbasisError("solve_eigenbasis: eigensolver did not converge");

    EigenBasis b;
    b.K = K;
    b.d = d;
    b.G = G;
    b.eta = opt.eta;
    b.delta = opt.delta;
    b.kappa = opt.kappa;
    b.C.resize(K, d);
    for (int n = 0; n < d; ++n) {
        const double half_sigma = es.eigenvalues()[n];
        if (!(half_sigma > 0.0)) throw EigenbasisError("solve_eigenbasis: non-positive eigenvalue");
        b.sigma.push_back(2.0 * half_sigma);
        // c = D^{-1/2} v has cᵀGc = vᵀMv = σ/2.
        Eigen::VectorXd c = rs.asDiagonal() * es.eigenvectors().col(n);
        c /= std::sqrt(half_sigma);
        Eigen::Index imax;
        c.cwiseAbs().maxCoeff(&imax);
        if (c[imax] < 0) c = -c;
        b.C.col(n) = c;
    }
    for (int n = 1; n < d; ++n)
        if (b.sigma[n] - b.sigma[n - 1] <= 1e-10 * b.sigma[n])
            throw EigenbasisError("solve_eigenbasis: eigenvalue cluster at n = " + std::to_string(n) + "; refusing to pick a rotation");
    for (int n = 0; n < d; ++n) {
        b.eps.push_back(std::min(opt.delta, std::pow(b.sigma[n], -opt.eta)));
        ChebSeries s{Basis::T, std::vector<double>(K + 1, 0.0)};
        for (int k = 1; k <= K; ++k) s.coeffs[k] = b.C(k - 1, n);
        std::array<ChebSeries, 5> ders;
        ders[0] = s;
        for (int r = 1; r <= 4; ++r) ders[r] = derivative(ders[r - 1]);
        b.series.push_back(std::move(ders));
    }
    return b;
}

/// Gram matrix plus eigensolve, with K = 16·d unless given.
[[nodiscard]] inline EigenBasis build_eigenbasis(const EquilibriumData& eq, int d, int K = 0, EigenbasisOptions opt = {}) {
    if (K <= 0) K = 16 * d;
    opt.delta = std::min(opt.delta, eq.delta);
    return solve_eigenbasis(gram_matrix(eq, K), d, opt);
}

namespace detail {

/// Jets of φ_n on [-1,1] (from the series) and of the Taylor-bump extension outside.
inline Jet phi_jet(const EigenBasis& b, int n, double x) {
    const auto& ders = b.series.at(n - 1);
    if (std::abs(x) <= 1.0) {
        Jet j;
        double f = 1.0;
        for (int r = 0; r < Jet::n; ++r) {
            if (r > 1) f *= r;
            j.c[r] = eval_series(ders[r], x) / f;
        }
        return j;
    }
    const double e = std::copysign(1.0, x);
    const double two_eps = 2.0 * b.eps.at(n - 1);
    if (std::abs(x) >= 1.0 + two_eps) return Jet{};
    const double f0 = eval_series(ders[0], e), f1 = eval_series(ders[1], e), f2 = eval_series(ders[2], e);
    const Jet t = Jet::variable(x - e);
    const Jet taylor = Jet::constant(f0) + f1 * t + (0.5 * f2) * (t * t);
    const Jet u = Jet::variable((std::abs(x) - 1.0) / two_eps, e / two_eps);
    return taylor * smooth_step(u);
}

}  // namespace detail

/// r-th derivative (r ≤ 4) of φ_n at x, including the compactly supported extension beyond [-1,1].
[[nodiscard]] inline double eval_phi(const EigenBasis& b, int n, double x, int r = 0) {
    if (n < 1 || n > b.d) throw std::out_of_range("eval_phi: mode out of range");
    if (r < 0 || r > 4) throw std::out_of_range("eval_phi: derivative order must be 0..4");
    return detail::phi_jet(b, n, x).d(r);
}

/// φ_n as a TestFunction (extension included).
[[nodiscard]] inline TestFunction phi_function(const EigenBasis& b, int n) {
    if (n < 1 || n > b.d) throw std::out_of_range("phi_function: mode out of range");
    TestFunction f;
    f.name = "phi(" + std::to_string(n) + ")";
    f.smoothness = 1000;
    f.eval = [&b, n](double x, int r) { return eval_phi(b, n, x, r); };
    return f;
}

/// φ_n on [-1,1] only, as its Chebyshev polynomial.
[[nodiscard]] inline TestFunction phi_polynomial(const EigenBasis& b, int n) {
    return fn::chebyshev_series("phi(" + std::to_string(n) + ")", b.phi_series(n));
}

namespace detail {

/// sup over `grid` of |Ξ_x(φ_n) - σ_n φ_n(x)| with q the semicircle rule, Ξ_x = 2x h(x) - ∫(h(t)-h(x))/(t-x) μ_sc(dt), h = φ' S.
inline double eigen_residual_rule(const EigenBasis& b, const EquilibriumData& eq, int n, const std::vector<double>& grid, const QuadratureRule& q) {
    const auto& ders = b.series.at(n - 1);
    const std::size_t m = q.nodes.size();
    std::vector<double> h(m), dh(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double t = q.nodes[i], S = eq.S(t);
        h[i] = eval_series(ders[1], t) * S;
        dh[i] = eval_series(ders[2], t) * S + eval_series(ders[1], t) * eq.dS(t);
    }
    double worst = 0.0;
    for (double x : grid) {
        const double S = eq.S(x), p1 = eval_series(ders[1], x);
        const double hx = p1 * S, dhx = eval_series(ders[2], x) * S + p1 * eq.dS(x);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += q.weights[i] * divided_difference(h[i], hx, q.nodes[i], x, dh[i], dhx);
        const double xi = 2.0 * x * hx - acc;
        worst = std::max(worst, std::abs(xi - b.sigma[n - 1] * eval_series(ders[0], x)));
    }
    return worst;
}

}  // namespace detail

/// sup_grid |Ξ^{μV}(φ_n) - σ_n φ_n| on an interior grid; the quadrature is checked against a doubled rule.
[[nodiscard]] inline double eigen_residual(const EigenBasis& b, const EquilibriumData& eq, int n, const std::vector<double>& grid) {
    for (double x : grid)
        if (!(std::abs(x) < 0.99 + 1e-12)) throw std::invalid_argument("eigen_residual: grid must lie in (-0.99, 0.99)");
    const int q1 = b.K + static_cast<int>(eq.S_T.coeffs.size()) + 8;
    const double r1 = detail::eigen_residual_rule(b, eq, n, grid, quad_rule(Measure::Semicircle, q1));
    const double r2 = detail::eigen_residual_rule(b, eq, n, grid, quad_rule(Measure::Semicircle, 2 * q1));
    if (!std::isfinite(r2) || std::abs(r1 - r2) > 1e-10 * b.sigma[n - 1] + 0.5 * r2)
        throw NumericalError("eigen_residual: quadrature did not converge for n = " + std::to_string(n));
    return r2;
}

/// Uniform interior grid of `points` values on [-0.99, 0.99].
[[nodiscard]] inline std::vector<double> interior_grid(int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = -0.99 + 1.98 * i / (points - 1);
    return g;
}

/// max |CᵀGC - I|.
[[nodiscard]] inline double orthonormality_residual(const EigenBasis& b) {
    const Eigen::MatrixXd E = b.C.transpose() * b.G * b.C - Eigen::MatrixXd::Identity(b.d, b.d);
    return E.cwiseAbs().maxCoeff();
}

/// max_n ‖D c_n - (2/σ_n) G c_n‖ / ‖G c_n‖.
[[nodiscard]] inline double generalized_residual(const EigenBasis& b) {
    double worst = 0.0;
    for (int n = 0; n < b.d; ++n) {
        const Eigen::VectorXd c = b.C.col(n), Gc = b.G * c;
        Eigen::VectorXd Dc(b.K);
        for (int k = 0; k < b.K; ++k) Dc[k] = (k + 1) * c[k];
        worst = std::max(worst, (Dc - (2.0 / b.sigma[n]) * Gc).norm() / Gc.norm());
    }
    return worst;
}

/// max_{n ≤ upto} |2σ_n Σ(φ_n) - 1|, with Σ from sigma_variance on the polynomial φ_n.
[[nodiscard]] inline double variance_identity_residual(const EigenBasis& b, int upto = 0) {
    if (upto <= 0 || upto > b.d) upto = b.d;
    double worst = 0.0;
    for (int n = 1; n <= upto; ++n) {
        const double s = sigma_variance(phi_polynomial(b, n), SigmaMethod::Fourier, b.K + 1);
        worst = std::max(worst, std::abs(2.0 * b.sigma[n - 1] * s - 1.0));
    }
    return worst;
}

struct PhiExpansion {
    double f0 = 0.0;                  ///< ∫ f dϱ
    std::vector<double> coeffs;       ///< f̂_n = ⟨f, φ_n⟩_{μV}
    std::vector<double> sigma_partial;  ///< Σ_{m ≤ n} f̂_m² / (2σ_m)
    std::vector<double> mean_partial;   ///< Σ_{m ≤ n} f̂_m 𝐦(φ_m), filled when mode means are supplied
    std::vector<double> parseval_partial;  ///< Σ_{m ≤ n} f̂_m²
};

/// ⟨f, T_k⟩_{μV} = k ∫ f' U_{k-1} S dμ_sc for k = 1..K.
[[nodiscard]] inline Eigen::VectorXd sobolev_moments(const TestFunction& f, const EquilibriumData& eq, int K) {
    const int n = 2 * K + static_cast<int>(eq.S_T.coeffs.size()) + 32;
    const auto q = quad_rule(Measure::Semicircle, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
    for (int i = 0; i < n; ++i) {
        const double x = q.nodes[i], th = std::acos(x), s = std::sin(th);
        const double w = q.weights[i] * f.d1(x) * eq.S(x);
        for (int k = 1; k <= K; ++k) b[k - 1] += w * k * std::sin(k * th) / s;
    }
    return b;
}

/// 𝐦(φ_n) for n = 1..d.
[[nodiscard]] inline std::vector<double> mode_means(const EigenBasis& b, const EquilibriumData& eq) {
    std::vector<double> m;
    for (int n = 1; n <= b.d; ++n) m.push_back(mean_m(phi_polynomial(b, n), eq, std::max(256, b.K)));
    return m;
}

[[nodiscard]] inline PhiExpansion phi_expand(const TestFunction& f, const EigenBasis& b, const EquilibriumData& eq, const std::vector<double>& means = {}) {
    PhiExpansion e;
    e.f0 = arcsine_integral(f);
    const Eigen::VectorXd fh = b.C.transpose() * sobolev_moments(f, eq, b.K);
    double s = 0.0, m = 0.0, p = 0.0;
    for (int n = 0; n < b.d; ++n) {
        e.coeffs.push_back(fh[n]);
        s += fh[n] * fh[n] / (2.0 * b.sigma[n]);
        p += fh[n] * fh[n];
        e.sigma_partial.push_back(s);
        e.parseval_partial.push_back(p);
        if (!means.empty()) {
            m += fh[n] * means.at(n);
            e.mean_partial.push_back(m);
        }
    }
    return e;
}

/// g_d = Σ_{n ≤ d} f̂_n φ_n, extension included.
[[nodiscard]] inline TestFunction truncated_function(const PhiExpansion& e, const EigenBasis& b, int d) {
    if (d < 1 || d > b.d) throw std::out_of_range("truncated_function: d out of range");
    TestFunction g;
    g.name = "g(" + std::to_string(d) + ")";
    g.smoothness = 1000;
    std::vector<double> c(e.coeffs.begin(), e.coeffs.begin() + d);
    g.eval = [&b, c](double x, int r) {
        double acc = 0.0;
        for (std::size_t n = 0; n < c.size(); ++n) acc += c[n] * eval_phi(b, static_cast<int>(n) + 1, x, r);
        return acc;
    };
    return g;
}

/// CSV: n, sigma_n, then the K T-coefficients of φ_n.
inline void write_basis_csv(std::ostream& os, const EigenBasis& b) {
    os << "n,sigma_n";
    for (int k = 1; k <= b.K; ++k) os << ",c_" << k;
    os << '\n';
    os.precision(17);
    for (int n = 0; n < b.d; ++n) {
        os << n + 1 << ',' << b.sigma[n];
        for (int k = 0; k < b.K; ++k) os << ',' << b.C(k, n);
        os << '\n';
    }
}

}  // namespace betaclt
