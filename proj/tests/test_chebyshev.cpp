#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "betaclt/chebyshev.hpp"
#include "betaclt/potential.hpp"

using namespace betaclt;

namespace {

double binom_central(int m) {
    double c = 1.0;
    for (int i = 1; i <= m; ++i) c = c * (m + i) / i;
    return c;
}

// ∫ x^{2m} dϱ = C(2m,m)/4^m, ∫ x^{2m} dμ_sc = Catalan(m)/4^m.
double arcsine_moment(int p) { return p % 2 ? 0.0 : binom_central(p / 2) / std::pow(4.0, p / 2); }
double semicircle_moment(int p) { return p % 2 ? 0.0 : binom_central(p / 2) / (p / 2 + 1) / std::pow(4.0, p / 2); }

// Midpoint rule in θ for (1/π)∫_0^π g(θ) dθ; spectrally accurate for smooth periodic g.
template <class G>
double theta_mean(G g, int n) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += g(pi * (j + 0.5) / n);
    return acc / n;
}

}  // namespace

TEST(EvalCheb, Examples) {
    EXPECT_DOUBLE_EQ(eval_cheb(Basis::T, 2, 1.0), 1.0);
    for (double x : {-0.5, 0.0, 0.7}) EXPECT_DOUBLE_EQ(eval_cheb(Basis::U, 1, x), 2.0 * x);
    const double h = 1e-5, x = 0.3;
    const double fd = (eval_cheb(Basis::T, 5, x + h) - eval_cheb(Basis::T, 5, x - h)) / (2 * h);
    EXPECT_NEAR(fd, 5.0 * eval_cheb(Basis::U, 4, x), 1e-8);
}

TEST(EvalCheb, MatchesTrigonometricForms) {
    for (int k = 0; k <= 40; ++k) {
        for (double x = -0.999; x < 1.0; x += 0.0371) {
            const double th = std::acos(x);
            EXPECT_NEAR(eval_cheb(Basis::T, k, x), std::cos(k * th), 1e-11);
            EXPECT_NEAR(eval_cheb(Basis::U, k, x), std::sin((k + 1) * th) / std::sin(th), 1e-9 * (k + 1));
        }
    }
}

TEST(EvalCheb, OutsideUnitIntervalUsesRecurrence) {
    const double x = 1.7;
    EXPECT_NEAR(eval_cheb(Basis::T, 6, x), std::cosh(6 * std::acosh(x)), 1e-9);
}

TEST(Clenshaw, AgreesWithTermwiseSum) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> c(20);
    for (auto& v : c) v = u(rng);
    for (Basis b : {Basis::T, Basis::U}) {
        for (double x : {-1.2, -0.4, 0.0, 0.9, 1.05}) {
            double direct = 0.0;
            for (int k = 0; k < 20; ++k) direct += c[k] * eval_cheb(b, k, x);
            EXPECT_NEAR(clenshaw(c, b, x), direct, 1e-13 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST(Conversions, TtoUandBack) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    ChebSeries t{Basis::T, std::vector<double>(30)};
    for (auto& v : t.coeffs) v = u(rng);
    auto back = u_to_t(t_to_u(t));
    for (std::size_t k = 0; k < t.coeffs.size(); ++k) EXPECT_NEAR(back.coeffs[k], t.coeffs[k], 1e-12);
    auto uu = t_to_u(t);
    for (double x : {-0.8, 0.1, 0.77}) EXPECT_NEAR(eval_series(uu, x), eval_series(t, x), 1e-12);
}

TEST(Conversions, DerivativeMatchesFiniteDifference) {
    ChebSeries t{Basis::T, {0.3, -0.2, 0.5, 0.1, -0.05, 0.02}};
    auto d = derivative(t);
    auto du = derivative_u(t);
    for (double x : {-0.6, 0.0, 0.45}) {
        const double h = 1e-6;
        const double fd = (eval_series(t, x + h) - eval_series(t, x - h)) / (2 * h);
        EXPECT_NEAR(eval_series(d, x), fd, 1e-8);
        EXPECT_NEAR(eval_series(du, x), fd, 1e-8);
    }
}

TEST(QuadRule, Examples) {
    auto a = quad_rule(Measure::Arcsine, 8);
    auto s = quad_rule(Measure::Semicircle, 8);
    double one = 0, x2a = 0, x2s = 0;
    for (int j = 0; j < 8; ++j) {
        one += a.weights[j];
        x2a += a.weights[j] * a.nodes[j] * a.nodes[j];
        x2s += s.weights[j] * s.nodes[j] * s.nodes[j];
    }
    EXPECT_NEAR(one, 1.0, 1e-14);
    EXPECT_NEAR(x2a, 0.5, 1e-14);
    EXPECT_NEAR(x2s, 0.25, 1e-14);
    EXPECT_THROW((void)quad_rule(Measure::Arcsine, 0), std::invalid_argument);
}

TEST(QuadRule, InvariantsAndExactness) {
    for (Measure m : {Measure::Arcsine, Measure::Semicircle}) {
        for (int K : {1, 2, 5, 16, 33}) {
            auto q = quad_rule(m, K);
            double sum = 0.0;
            for (int j = 0; j < K; ++j) {
                sum += q.weights[j];
                EXPECT_GT(q.weights[j], 0.0);
                EXPECT_LT(std::abs(q.nodes[j]), 1.0);
                if (j > 0) {
                    EXPECT_LT(q.nodes[j - 1], q.nodes[j]);
                }
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
            for (int p = 0; p <= 2 * K - 1; ++p) {
                double acc = 0.0;
                for (int j = 0; j < K; ++j) acc += q.weights[j] * std::pow(q.nodes[j], p);
                const double exact = m == Measure::Arcsine ? arcsine_moment(p) : semicircle_moment(p);
                EXPECT_NEAR(acc, exact, 1e-13) << "K=" << K << " p=" << p;
            }
        }
    }
}

TEST(Orthogonality, ArcsineAndSemicircle) {
    auto a = quad_rule(Measure::Arcsine, 40);
    auto s = quad_rule(Measure::Semicircle, 40);
    for (int k = 0; k <= 32; ++k) {
        for (int l = 0; l <= 32; ++l) {
            double tt = 0, uu = 0;
            for (int j = 0; j < 40; ++j) {
                tt += a.weights[j] * eval_cheb(Basis::T, k, a.nodes[j]) * eval_cheb(Basis::T, l, a.nodes[j]);
                uu += s.weights[j] * eval_cheb(Basis::U, k, s.nodes[j]) * eval_cheb(Basis::U, l, s.nodes[j]);
            }
            const double want_t = k != l ? 0.0 : (k == 0 ? 1.0 : 0.5);
            EXPECT_NEAR(tt, want_t, 1e-12);
            EXPECT_NEAR(uu, k == l ? 1.0 : 0.0, 1e-12);
        }
    }
}

TEST(ChebCoeffs, Examples) {
    auto t3 = cheb_coeffs(fn::chebyshev_t(3), 8);
    for (int k = 0; k <= 8; ++k) EXPECT_NEAR(t3.coeffs[k], k == 3 ? 1.0 : 0.0, 1e-14);
    auto sq = cheb_coeffs(fn::polynomial("x2", {0, 0, 1}), 8);
    for (int k = 0; k <= 8; ++k) EXPECT_NEAR(sq.coeffs[k], (k == 0 || k == 2) ? 0.5 : 0.0, 1e-14);
}

TEST(ChebCoeffs, ExponentialAgainstTrapezoidOracle) {
    auto c = cheb_coeffs(fn::exponential(1.0), 32);
    for (int k = 0; k <= 32; ++k) {
        const double oracle =
            (k == 0 ? 1.0 : 2.0) * theta_mean([k](double th) { return std::exp(std::cos(th)) * std::cos(k * th); }, 1000000);
        EXPECT_NEAR(c.coeffs[k], oracle, 1e-13);
        // Closed form 2 I_k(1) confirms the oracle.
        EXPECT_NEAR(c.coeffs[k], (k == 0 ? 1.0 : 2.0) * std::cyl_bessel_i(static_cast<double>(k), 1.0), 1e-13);
        if (k >= 20) {
            EXPECT_LT(std::abs(c.coeffs[k]), 1e-12);
        }
    }
}

TEST(ChebCoeffs, RejectsNonFinite) {
    TestFunction bad;
    bad.eval = [](double x, int) { return 1.0 / (x - x); };
    EXPECT_THROW((void)cheb_coeffs(bad, 4), NumericalError);
}

TEST(FiniteHilbert, ChebyshevTMapsToU) {
    for (int k = 1; k <= 20; ++k) {
        ChebSeries g{Basis::T, std::vector<double>(k + 1, 0.0)};
        g.coeffs[k] = 1.0;
        for (int i = 0; i < 50; ++i) {
            const double x = -0.98 + 1.96 * i / 49.0;
            EXPECT_NEAR(finite_hilbert(g, x), eval_cheb(Basis::U, k - 1, x), 1e-12);
        }
    }
    EXPECT_EQ(finite_hilbert(ChebSeries{Basis::T, {0.0, 0.0}}, 0.2), 0.0);
    EXPECT_THROW((void)finite_hilbert(ChebSeries{Basis::T, {0.0, 1.0}}, 1.0), std::domain_error);
}

TEST(FiniteHilbert, SeriesMatchesQuadratureForm) {
    auto f = fn::polynomial("x3", {0, 0, 0, 1});
    auto g = cheb_coeffs(f, 8);
    EXPECT_NEAR(g.coeffs[0], 0.0, 1e-15);
    EXPECT_NEAR(finite_hilbert(g, 0.3), finite_hilbert_quad(f, 0.3, 1 << 12), 1e-10);
}

TEST(FiniteHilbert, ConsistencyOnInteriorGrid) {
    for (int k = 1; k <= 30; ++k) {
        auto f = fn::chebyshev_t(k);
        for (int i = 0; i < 100; ++i) {
            const double x = std::cos(pi * (i + 0.5) / 100.0) * 0.999;
            const double uk = eval_cheb(Basis::U, k - 1, x);
            ChebSeries g{Basis::T, std::vector<double>(k + 1, 0.0)};
            g.coeffs[k] = 1.0;
            EXPECT_NEAR(finite_hilbert(g, x), uk, 1e-10);
            // The divided-difference form loses a few digits when a node lands near x.
            EXPECT_NEAR(finite_hilbert_quad(f, x, 64), uk, 1e-9 * std::max(1.0, std::abs(uk))) << k << " " << x;
        }
    }
}

TEST(FiniteHilbert, ArcsineMeanIdentity) {
    // f = cos(2x) - J_0(2) has zero arcsine mean; then ∫ x U_x(f) ϱ(dx) = (f(1)+f(-1))/2.
    const double j0 = std::cyl_bessel_j(0.0, 2.0);
    TestFunction f;
    f.eval = [j0](double x, int r) { return fn::cosine(2.0).eval(x, r) - (r == 0 ? j0 : 0.0); };
    auto g = cheb_coeffs(f, 40);
    EXPECT_NEAR(g.coeffs[0], 0.0, 1e-14);
    auto q = quad_rule(Measure::Arcsine, 80);
    double acc = 0.0;
    for (int j = 0; j < 80; ++j) acc += q.weights[j] * q.nodes[j] * finite_hilbert(g, q.nodes[j]);
    EXPECT_NEAR(acc, 0.5 * (f(1.0) + f(-1.0)), 1e-12);
}

TEST(HilbertSemicircle, Examples) {
    EXPECT_EQ(hilbert_semicircle(0.0), 0.0);
    EXPECT_DOUBLE_EQ(hilbert_semicircle(0.5), 1.0);
    EXPECT_NEAR(hilbert_semicircle(2.0), 2.0 * (2.0 - std::sqrt(3.0)), 1e-14);
    EXPECT_NEAR(hilbert_semicircle(-2.0), -2.0 * (2.0 - std::sqrt(3.0)), 1e-14);
}

TEST(HilbertSemicircle, QuadratureOracleOffSupport) {
    // Smooth integrand off the support: high-order semicircle Gauss rule is an independent oracle.
    auto q = quad_rule(Measure::Semicircle, 400);
    for (double x : {-3.0, -1.3, 1.01, 1.2, 2.0, 5.0}) {
        double acc = 0.0;
        for (int j = 0; j < 400; ++j) acc += q.weights[j] / (x - q.nodes[j]);
        EXPECT_NEAR(hilbert_semicircle(x), acc, x == 1.01 ? 1e-6 : 1e-10) << x;
    }
}

TEST(HilbertSemicircle, PrincipalValueOracleOnSupport) {
    // pv∫ s(y)/(x-y) dy with s the semicircle density: subtract s(x) and integrate the log term exactly.
    for (double x : {-0.7, 0.2, 0.6}) {
        const double sx = 2.0 / pi * std::sqrt(1 - x * x);
        const int n = 200000;
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const double th = pi * (j + 0.5) / n;
            const double y = std::cos(th);
            const double sy = 2.0 / pi * std::sin(th);
            acc += (sy - sx) / (x - y) * std::sin(th) * pi / n;
        }
        acc += sx * std::log((1 + x) / (1 - x));
        EXPECT_NEAR(hilbert_semicircle(x), acc, 1e-6) << x;
    }
}

TEST(HilbertWeighted, UTimesSemicircleMapsToTwoT) {
    for (int k = 1; k <= 50; ++k) {
        ChebSeries u{Basis::U, std::vector<double>(k, 0.0)};
        u.coeffs[k - 1] = 1.0;
        auto q = quad_rule(Measure::Semicircle, 64);
        for (double x : {-0.9, -0.3, 0.15, 0.8}) {
            // Divided difference is a polynomial: the Gauss rule is exact, plus U_{k-1}(x) H_x(μ_sc).
            const double ux = eval_cheb(Basis::U, k - 1, x);
            double acc = ux * 2.0 * x;
            for (int j = 0; j < 64; ++j) acc += q.weights[j] * (eval_cheb(Basis::U, k - 1, q.nodes[j]) - ux) / (x - q.nodes[j]);
            EXPECT_NEAR(hilbert_weighted_semicircle(u, x), 2.0 * eval_cheb(Basis::T, k, x), 1e-9);
            EXPECT_NEAR(acc, 2.0 * eval_cheb(Basis::T, k, x), 1e-8);
        }
    }
}

TEST(HilbertWeighted, OffSupportMatchesDirectQuadrature) {
    ChebSeries u{Basis::U, {0.7, -0.2, 0.1, 0.05}};
    auto q = quad_rule(Measure::Semicircle, 400);
    for (double x : {-1.8, -1.1, 1.1, 2.5}) {
        double acc = 0.0;
        for (int j = 0; j < 400; ++j) acc += q.weights[j] * eval_series(u, q.nodes[j]) / (x - q.nodes[j]);
        EXPECT_NEAR(hilbert_weighted_semicircle(u, x), acc, 1e-9);
    }
}

TEST(Tricomi, Examples) {
    auto t = tricomi_invert(ChebSeries{Basis::U, {1.0}});
    ASSERT_EQ(t.coeffs.size(), 2u);
    EXPECT_EQ(t.coeffs[0], 0.0);
    EXPECT_EQ(t.coeffs[1], 1.0);
    auto z = tricomi_invert(ChebSeries{Basis::U, {0.0}});
    for (double c : z.coeffs) EXPECT_EQ(c, 0.0);
    ChebSeries phi{Basis::T, {0, 0, 1.0, 0, 0, 0.3}};
    auto back = tricomi_invert(finite_hilbert_series(phi));
    for (std::size_t k = 0; k < phi.coeffs.size(); ++k) EXPECT_NEAR(back.coeffs[k], phi.coeffs[k], 1e-12);
}

TEST(Tricomi, RandomRoundtrip) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const int deg = 1 + static_cast<int>(rng() % 64);
        ChebSeries phi{Basis::T, std::vector<double>(deg + 1)};
        for (int k = 1; k <= deg; ++k) phi.coeffs[k] = u(rng);
        auto back = tricomi_invert(finite_hilbert_series(phi));
        for (int k = 0; k <= deg; ++k) EXPECT_NEAR(back.coeffs[k], phi.coeffs[k], 1e-12);
    }
}

TEST(Sigma, ChebyshevAndPolynomialValues) {
    for (int k : {1, 2, 5})
        for (auto m : {SigmaMethod::Fourier, SigmaMethod::DoubleIntegral, SigmaMethod::HilbertPairing})
            EXPECT_NEAR(sigma_variance(fn::chebyshev_t(k), m, 16), k / 4.0, 1e-12);
    EXPECT_NEAR(sigma_variance(fn::constant(3.0), SigmaMethod::Fourier, 8), 0.0, 1e-15);
    EXPECT_NEAR(sigma_variance(fn::polynomial("x2", {0, 0, 1}), SigmaMethod::Fourier, 8), 0.125, 1e-14);
    EXPECT_NEAR(sigma_variance(fn::polynomial("x2", {0, 0, 1}), SigmaMethod::DoubleIntegral, 8), 0.125, 1e-13);
}

TEST(Sigma, MethodAgreement) {
    std::vector<TestFunction> fs{fn::chebyshev_t(3), fn::polynomial("x2", {0, 0, 1}), fn::exponential(-1.0), fn::sine(3.0)};
    for (const auto& f : fs) {
        const double a = sigma_variance(f, SigmaMethod::Fourier, 128);
        const double b = sigma_variance(f, SigmaMethod::DoubleIntegral, 128);
        const double c = sigma_variance(f, SigmaMethod::HilbertPairing, 128);
        EXPECT_NEAR(a, b, 1e-6 * a) << f.name;
        EXPECT_NEAR(a, c, 1e-6 * a) << f.name;
        EXPECT_GE(a, 0.0);
    }
}

TEST(Sigma, PartialSumsAreMonotone) {
    auto s = cheb_coeffs(fn::sine(3.0), 64);
    auto p = sigma_partial_sums(s);
    for (std::size_t k = 1; k < p.size(); ++k) EXPECT_GE(p[k], p[k - 1]);
    EXPECT_NEAR(p.back(), sigma_from_series(s), 1e-15);
}

TEST(Sigma, NonConvergenceIsReported) {
    TestFunction kink;
    kink.eval = [](double x, int r) { return r == 0 ? std::abs(x) : (r == 1 ? (x > 0 ? 1.0 : -1.0) : 0.0); };
    EXPECT_THROW((void)sigma_variance(kink, SigmaMethod::Fourier, 4, 1e-10), NumericalError);
}
