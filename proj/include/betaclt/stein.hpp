#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "betaclt/eigenbasis.hpp"
#include "betaclt/equilibrium.hpp"
#include "betaclt/potential.hpp"
#include "betaclt/sampler.hpp"
#include "betaclt/stats.hpp"

namespace betaclt {

class SteinError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One coordinate of F: the function, its eigenvalue, and the constants needed to center it.
struct ModeSpec {
    TestFunction phi;
    double sigma = 0.0;
    double mean = 0.0;          ///< 𝐦(φ)
    double mu_phi = 0.0;        ///< ∫ φ dμ_V
    double mean_residual = 0.0; ///< |𝐦(φ) - σ^{-1}∫φ'' dμ_V|, zero when not checked
};

/// T_k/k with σ = 2k for V = x² (S ≡ 1).
[[nodiscard]] inline std::vector<ModeSpec> chebyshev_modes(const EquilibriumData& eq, const std::vector<int>& ks) {
    for (std::size_t k = 1; k < eq.S_T.coeffs.size(); ++k)
        if (std::abs(eq.S_T.coeffs[k]) > 1e-10 || std::abs(eq.S_T.coeffs[0] - 1.0) > 1e-10)
            throw SteinError("chebyshev_modes: Chebyshev polynomials are eigenmodes only when S = 1");
    std::vector<ModeSpec> modes;
    for (int k : ks) {
        if (k < 1) throw SteinError("chebyshev_modes: k must be at least 1");
        auto c = chebyshev_monomials(k);
        for (auto& v : c) v /= k;
        ModeSpec m;
        m.phi = fn::polynomial("T(" + std::to_string(k) + ")/" + std::to_string(k), c);
        m.sigma = 2.0 * k;
        m.mean = (k % 2 == 0 ? 1.0 : 0.0) / k;
        m.mu_phi = k == 2 ? -0.25 : 0.0;
        modes.push_back(std::move(m));
    }
    return modes;
}

/// The first `count` eigenbasis modes, with 𝐦(φ_n) checked against σ_n^{-1}∫φ_n'' dμ_V.
[[nodiscard]] inline std::vector<ModeSpec> eigenbasis_modes(const EigenBasis& b, const EquilibriumData& eq, int count) {
    if (count < 1 || count > b.d) throw SteinError("eigenbasis_modes: mode count out of range");
    const auto means = mode_means(b, eq);
    std::vector<ModeSpec> modes;
    for (int n = 1; n <= count; ++n) {
        ModeSpec m;
        m.phi = phi_function(b, n);
        m.sigma = b.sigma[n - 1];
        m.mean = means[n - 1];
        const auto poly = phi_polynomial(b, n);
        m.mu_phi = mu_integral(poly, eq, std::max(512, b.K + 64));
        const TestFunction dd{"phi''", [poly](double x, int r) { return poly.eval(x, r + 2); }, 8, {}};
        m.mean_residual = std::abs(m.mean - mu_integral(dd, eq, std::max(512, b.K + 64)) / m.sigma);
        modes.push_back(std::move(m));
    }
    return modes;
}

/// L(Σu(λ_j)) in the symmetrized form (1-β/2)Σu'' - βNΣV'u' + (β/2)Σ_{i,j}(u'(λ_i)-u'(λ_j))/(λ_i-λ_j), diagonal u''.
[[nodiscard]] inline double generator_linstat(const TestFunction& u, const std::vector<double>& lambda, const Potential& V, double beta) {
    const std::size_t N = lambda.size();
    std::vector<double> d1(N), d2(N);
    CompensatedSum local;
    for (std::size_t i = 0; i < N; ++i) {
        d1[i] = u.d1(lambda[i]);
        d2[i] = u.d2(lambda[i]);
        local.add((1.0 - beta / 2.0) * d2[i] - beta * N * V.d1(lambda[i]) * d1[i]);
    }
    CompensatedSum pairs;
    for (std::size_t i = 0; i < N; ++i) {
        pairs.add(0.5 * d2[i]);
        for (std::size_t j = i + 1; j < N; ++j) pairs.add(divided_difference(d1[i], d1[j], lambda[i], lambda[j], d2[i], d2[j]));
    }
    return local.value() + beta * pairs.value();
}

/// Direct form Σu'' - βNΣV'u' + βΣ_{i≠j} u'(λ_j)/(λ_j-λ_i).
[[nodiscard]] inline double generator_linstat_naive(const TestFunction& u, const std::vector<double>& lambda, const Potential& V, double beta) {
    const std::size_t N = lambda.size();
    double acc = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        acc += u.d2(lambda[j]) - beta * N * V.d1(lambda[j]) * u.d1(lambda[j]);
        for (std::size_t i = 0; i < N; ++i)
            if (i != j) acc += beta * u.d1(lambda[j]) / (lambda[j] - lambda[i]);
    }
    return acc;
}

/// Γ(Σu, Σv) = Σ_j u'(λ_j) v'(λ_j).
[[nodiscard]] inline double gamma_linstat(const TestFunction& u, const TestFunction& v, const std::vector<double>& lambda) {
    CompensatedSum s;
    for (double x : lambda) s.add(u.d1(x) * v.d1(x));
    return s.value();
}

namespace detail {

inline double dot_power_sums(const std::vector<double>& c, const std::vector<double>& p) {
    if (p.size() < c.size()) throw std::invalid_argument("power-sum path: not enough power sums");
    double s = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) s += c[m] * p[m];
    return s;
}

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

/// Σ_{i,j} of the divided difference of Σ_m c_m x^m, i.e. Σ_m c_m Σ_{a+b=m-1} p_a p_b.
inline double pair_sum_power_sums(const std::vector<double>& c, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t m = 1; m < c.size(); ++m)
        for (std::size_t a = 0; a < m; ++a) s += c[m] * p[a] * p[m - 1 - a];
    return s;
}

inline void require_polynomial(const TestFunction& u, const Potential& V) {
    if (!u.is_polynomial() || V.monomials.empty()) throw std::logic_error("power-sum generator needs polynomial u and V");
}

}  // namespace detail

/// Power sums p_0..p_k needed by the power-sum generator and Γ for these degrees.
[[nodiscard]] inline int power_sum_order(const std::vector<ModeSpec>& modes, const Potential& V) {
    int deg = 0;
    for (const auto& m : modes) deg = std::max(deg, static_cast<int>(m.phi.monomials.size()) - 1);
    const int dv = static_cast<int>(V.monomials.size()) - 1;
    return std::max({deg, 2 * deg - 2, deg + dv - 2});
}

/// generator_linstat from the power sums of a configuration (polynomial u and V).
[[nodiscard]] inline double generator_power_sums(const TestFunction& u, const std::vector<double>& p, const Potential& V, double beta) {
    detail::require_polynomial(u, V);
    const double N = p.at(0);
    const auto du = poly_derivative(u.monomials), ddu = poly_derivative(du);
    const auto vu = detail::poly_mul(poly_derivative(V.monomials), du);
    return (1.0 - beta / 2.0) * detail::dot_power_sums(ddu, p) - beta * N * detail::dot_power_sums(vu, p) +
           0.5 * beta * detail::pair_sum_power_sums(du, p);
}

[[nodiscard]] inline double gamma_power_sums(const TestFunction& u, const TestFunction& v, const std::vector<double>& p) {
    if (!u.is_polynomial() || !v.is_polynomial()) throw std::logic_error("gamma_power_sums: polynomial functions only");
    return detail::dot_power_sums(detail::poly_mul(poly_derivative(u.monomials), poly_derivative(v.monomials)), p);
}

/// F, LF and Γ(F_i, F_j) for one configuration.
struct GeneratorSample {
    std::vector<double> F;
    std::vector<double> LF;
    Eigen::MatrixXd Gamma;
};

namespace detail {

inline double centering(const ModeSpec& m, int N, double beta) { return N * m.mu_phi + (1.0 / beta - 0.5) * m.mean; }

}  // namespace detail

/// F_n = √(βσ_n)(Σφ_n(λ_j) - N∫φ_n dμ_V - (1/β - 1/2)𝐦(φ_n)), its generator image and Γ-matrix.
[[nodiscard]] inline GeneratorSample evaluate_modes(const std::vector<ModeSpec>& modes, const std::vector<double>& lambda, const Potential& V, double beta) {
    const int d = static_cast<int>(modes.size()), N = static_cast<int>(lambda.size());
    GeneratorSample g;
    g.Gamma.resize(d, d);
    std::vector<std::vector<double>> der(d, std::vector<double>(N));
    for (int n = 0; n < d; ++n) {
        const auto& m = modes[n];
        const double s = std::sqrt(beta * m.sigma);
        CompensatedSum sum;
        for (int j = 0; j < N; ++j) {
            sum.add(m.phi(lambda[j]));
            der[n][j] = m.phi.d1(lambda[j]);
        }
        g.F.push_back(s * (sum.value() - detail::centering(m, N, beta)));
        g.LF.push_back(s * generator_linstat(m.phi, lambda, V, beta));
    }
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            CompensatedSum s;
            for (int j = 0; j < N; ++j) s.add(der[a][j] * der[b][j]);
            g.Gamma(a, b) = g.Gamma(b, a) = beta * std::sqrt(modes[a].sigma * modes[b].sigma) * s.value();
        }
    return g;
}

/// evaluate_modes from power sums (polynomial modes and V).
[[nodiscard]] inline GeneratorSample evaluate_modes_power_sums(const std::vector<ModeSpec>& modes, const std::vector<double>& p, const Potential& V, double beta) {
    const int d = static_cast<int>(modes.size());
    const int N = static_cast<int>(std::lround(p.at(0)));
    GeneratorSample g;
    g.Gamma.resize(d, d);
    for (int n = 0; n < d; ++n) {
        const auto& m = modes[n];
        detail::require_polynomial(m.phi, V);
        const double s = std::sqrt(beta * m.sigma);
        g.F.push_back(s * (detail::dot_power_sums(m.phi.monomials, p) - detail::centering(m, N, beta)));
        g.LF.push_back(s * generator_power_sums(m.phi, p, V, beta));
    }
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b)
            g.Gamma(a, b) = g.Gamma(b, a) = beta * std::sqrt(modes[a].sigma * modes[b].sigma) * gamma_power_sums(modes[a].phi, modes[b].phi, p);
    return g;
}

struct SteinEstimate {
    double A = 0.0, A_se = 0.0;
    double B = 0.0, B_se = 0.0;
    double bound = 0.0;
    double tv_bound = 0.0;                ///< 2A + 2B, reported for d = 1 only
    std::vector<double> A2_per_mode;      ///< E(F_n + LF_n/(βNσ_n))²
    std::vector<double> B2_per_mode;      ///< E Σ_j (δ_nj - Γ_nj/(βNσ_n))²
    std::vector<double> mean_residual;    ///< per-mode 𝐦 check carried from the mode specs
    int d = 0;
    int N = 0;
    double beta = 0.0;
    std::string potential;
    std::size_t M = 0;
};

/// Running Monte Carlo averages of ‖F + K^{-1}LF‖² and ‖Id - K^{-1}Γ(F)‖²_HS with K = βN diag(σ).
class SteinAccumulator {
public:
    SteinAccumulator(std::vector<ModeSpec> modes, int N, double beta) : modes_(std::move(modes)), N_(N), beta_(beta) {
        if (modes_.empty()) throw SteinError("stein: at least one mode is required");
        a_per_.assign(modes_.size(), CompensatedSum{});
        b_per_.assign(modes_.size(), CompensatedSum{});
    }

    void add(const GeneratorSample& g) {
        const std::size_t d = modes_.size();
        double a = 0.0, b = 0.0;
        for (std::size_t n = 0; n < d; ++n) {
            const double k = beta_ * N_ * modes_[n].sigma;
            const double r = g.F[n] + g.LF[n] / k;
            a += r * r;
            a_per_[n].add(r * r);
            double row = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double e = (n == j ? 1.0 : 0.0) - g.Gamma(n, j) / k;
                row += e * e;
            }
            b += row;
            b_per_[n].add(row);
        }
        a_.push_back(a);
        b_.push_back(b);
    }

    [[nodiscard]] SteinEstimate result(int batches = 32) const {
        const std::size_t M = a_.size();
        if (M < static_cast<std::size_t>(std::max(batches, 2))) throw SteinError("stein: too few samples for batch-means errors");
        SteinEstimate e;
        e.d = static_cast<int>(modes_.size());
        e.N = N_;
        e.beta = beta_;
        e.M = M;
        const double a2 = mean_of(a_), b2 = mean_of(b_);
        const double a2_se = batch_means_se(a_, batches), b2_se = batch_means_se(b_, batches);
        e.A = std::sqrt(a2);
        e.B = std::sqrt(b2);
        // Delta method; at zero the square root of the squared-mean error is the honest scale.
        e.A_se = e.A > 0 ? a2_se / (2.0 * e.A) : std::sqrt(a2_se);
        e.B_se = e.B > 0 ? b2_se / (2.0 * e.B) : std::sqrt(b2_se);
        e.bound = e.A + e.B;
        if (e.d == 1) e.tv_bound = 2.0 * e.A + 2.0 * e.B;
        for (std::size_t n = 0; n < modes_.size(); ++n) {
            e.A2_per_mode.push_back(a_per_[n].value() / M);
            e.B2_per_mode.push_back(b_per_[n].value() / M);
            e.mean_residual.push_back(modes_[n].mean_residual);
        }
        return e;
    }

private:
    std::vector<ModeSpec> modes_;
    int N_;
    double beta_;
    std::vector<double> a_, b_;
    std::vector<CompensatedSum> a_per_, b_per_;
};

/// Stein certificate A + B for the modes over a sample set that must match (V, β, N).
[[nodiscard]] inline SteinEstimate stein_certificate(const SampleSet& samples, const std::vector<ModeSpec>& modes, const EquilibriumData& eq, double beta, int N) {
    if (samples.N != N || samples.beta != beta || samples.potential != eq.V.name)
        throw SteinError("stein: samples were drawn for (" + samples.potential + ", beta=" + std::to_string(samples.beta) + ", N=" +
                         std::to_string(samples.N) + ") but the certificate asks for (" + eq.V.name + ", beta=" + std::to_string(beta) +
                         ", N=" + std::to_string(N) + ")");
    SteinAccumulator acc(modes, N, beta);
    for (const auto& l : samples.samples) {
        if (static_cast<int>(l.size()) != N) throw SteinError("stein: configuration size does not match N");
        acc.add(evaluate_modes(modes, l, eq.V, beta));
    }
    auto e = acc.result();
    e.potential = eq.V.name;
    return e;
}

/// Stein certificate for polynomial modes under V = x², streaming tridiagonal power sums.
[[nodiscard]] inline SteinEstimate stein_certificate_gaussian(const std::vector<ModeSpec>& modes, const EquilibriumData& eq, const SamplerConfig& cfg) {
    const int kmax = power_sum_order(modes, eq.V);
    SteinAccumulator acc(modes, cfg.N, cfg.beta);
    sample_gaussian_beta_power_sums(cfg, kmax, [&](const std::vector<double>& p) { acc.add(evaluate_modes_power_sums(modes, p, eq.V, cfg.beta)); });
    auto e = acc.result();
    e.potential = eq.V.name;
    return e;
}

/// ∫ x^a dμ_sc on [-1,1]: Catalan(a/2)/4^{a/2} for even a.
[[nodiscard]] inline double semicircle_moment(int a) {
    if (a % 2 != 0) return 0.0;
    double m = 1.0;  // Catalan(r)/4^r by C_{r} = C_{r-1}·2(2r-1)/(r+1)
    for (int r = 1; r <= a / 2; ++r) m *= 2.0 * (2.0 * r - 1.0) / (r + 1.0) / 4.0;
    return m;
}

/// ζ_k = ∬ (T_k'(x)-T_k'(y))/(x-y) ν_N(dx)ν_N(dy), ν_N = Σδ_{λ_j} - Nμ_sc, from the monomial expansion of T_k'.
[[nodiscard]] inline double gue_zeta_power_sums(int k, const std::vector<double>& p) {
    if (k < 1) throw std::invalid_argument("gue_zeta: k must be at least 1");
    const auto dT = poly_derivative(chebyshev_monomials(k));
    const double N = p.at(0);
    std::vector<double> nu(dT.size());
    for (std::size_t a = 0; a < nu.size(); ++a) nu[a] = (a == 0 ? 0.0 : p.at(a) - N * semicircle_moment(static_cast<int>(a)));
    return detail::pair_sum_power_sums(dT, nu);
}

[[nodiscard]] inline double gue_zeta(int k, const std::vector<double>& lambda) {
    std::vector<double> p(std::max(k, 1), 0.0);
    for (double x : lambda) {
        double v = 1.0;
        for (auto& s : p) {
            s += v;
            v *= x;
        }
    }
    return gue_zeta_power_sums(k, p);
}

}  // namespace betaclt
