#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "betaclt/equilibrium.hpp"
#include "betaclt/registry.hpp"

using namespace betaclt;

namespace {

// ∫ log|x-y| μ_V(dy) for |x| < 1 in θ = arccos y. The log singularity at θ_x is split off and its
// moment ∫_0^π log|θ-θ_x| dθ integrated exactly.
double log_potential_oracle(const EquilibriumData& eq, double x) {
    const double tx = std::acos(x);
    auto g = [&](double th) { return eq.S(std::cos(th)) * (2.0 / pi) * std::sin(th) * std::sin(th); };
    const int n = 400000;
    const double h = pi / n;
    const double gx = g(tx);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        const double th = (j + 0.5) * h;
        const double d = std::abs(th - tx);
        const double smooth = std::log(std::abs(x - std::cos(th))) - std::log(d);
        acc += (smooth * g(th) + std::log(d) * (g(th) - gx)) * h;
    }
    auto ulog = [](double u) { return u > 0 ? u * std::log(u) - u : 0.0; };
    acc += gx * (ulog(tx) + ulog(pi - tx));
    return acc;
}

double cdf_oracle(const EquilibriumData& eq, double x) {
    // Simpson in θ over [arccos x, π] of S(cos t)(2/π)sin²t.
    const double a = std::acos(x), b = pi;
    const int n = 4000;
    const double h = (b - a) / n;
    auto g = [&](double t) { return eq.S(std::cos(t)) * (2.0 / pi) * std::sin(t) * std::sin(t); };
    double acc = g(a) + g(b);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
    return acc * h / 3.0;
}

Potential quartic_raw(double t) { return polynomial_potential("raw", {0, 0, 1, 0, t}); }

}  // namespace

TEST(DensityS, GaussianIsOne) {
    auto V = gaussian_potential();
    for (double x : {-1.25, -0.3, 0.0, 0.77, 1.0, 1.2}) EXPECT_NEAR(density_S(V, x), 1.0, 1e-14);
}

TEST(DensityS, EvenPotentialGivesEvenDensity) {
    auto V = normalize_potential(quartic_raw(0.3)).W;
    for (double x : {0.1, 0.5, 0.9, 1.1}) EXPECT_NEAR(density_S(V, x), density_S(V, -x), 1e-13);
}

TEST(DensityS, QuarticMatchesRefinedQuadrature) {
    auto V = normalize_potential(polynomial_potential("x4", {0, 0, 0, 0, 1})).W;
    const double ref = detail::density_S_rule(V, 0.0, quad_rule(Measure::Arcsine, 1 << 13));
    EXPECT_NEAR(density_S(V, 0.0), ref, 1e-9);
}

TEST(DensityS, NonConvergenceIsReported) {
    Potential V;
    V.d = [](double x, int r) {
        // |x|^{2.5}: V'' is not smooth at 0, so small rules disagree.
        const double a = std::abs(x);
        if (r == 0) return std::pow(a, 2.5);
        if (r == 1) return 2.5 * std::copysign(std::pow(a, 1.5), x);
        return 3.75 * std::pow(a, 0.5);
    };
    EXPECT_THROW((void)density_S(V, 0.0, 8, 1e-12), NumericalError);
}

TEST(VerifyOneCut, Gaussian) {
    auto eq = verify_one_cut(gaussian_potential());
    for (double x : {-0.9, 0.0, 0.4}) EXPECT_NEAR(eq.S(x), 1.0, 1e-13);
    EXPECT_NEAR(eq.ell_V, 0.5 + std::log(2.0), 1e-12);
    // Independent oracle for ∫ log|y| μ_sc(dy).
    EXPECT_NEAR(eq.ell_V, 0.0 - log_potential_oracle(eq, 0.0), 1e-8);
    EXPECT_LT(eq.mass_residual, 1e-13);
    EXPECT_LT(eq.variational_residual, 1e-12);
    EXPECT_LT(eq.q_residual, 1e-12);
    EXPECT_GE(eq.min_outside_gap, 0.0);
}

TEST(VerifyOneCut, ConcavePotentialFails) {
    try {
        (void)verify_one_cut(polynomial_potential("neg", {0, 0, -1}));
        FAIL() << "expected failure";
    } catch (const OneCutError& e) {
        EXPECT_TRUE(e.kind() == OneCutError::Kind::Mass || e.kind() == OneCutError::Kind::OffCriticality);
    }
}

TEST(VerifyOneCut, DistinctDiagnostics) {
    // Unnormalized: mass 2.
    try {
        (void)verify_one_cut(polynomial_potential("wide", {0, 0, 2}));
        FAIL();
    } catch (const OneCutError& e) {
        EXPECT_EQ(e.kind(), OneCutError::Kind::Mass);
    }
    // Mass 1 but off-centre: the variational identity fails.
    try {
        (void)verify_one_cut(polynomial_potential("shifted", {0, 0.3, 1}));
        FAIL();
    } catch (const OneCutError& e) {
        EXPECT_EQ(e.kind(), OneCutError::Kind::Variational);
    }
    // V = a x² + b x⁴ has S(x) = a + b + 2b x² and mass a + 3b/2; a = -3.5, b = 3 gives mass 1, S(0) < 0.
    try {
        (void)verify_one_cut(polynomial_potential("double_well", {0, 0, -3.5, 0, 3.0}));
        FAIL();
    } catch (const OneCutError& e) {
        EXPECT_EQ(e.kind(), OneCutError::Kind::OffCriticality);
    }
}

TEST(VerifyOneCut, QuarticPasses) {
    auto n = normalize_potential(quartic_raw(0.1));
    auto eq = verify_one_cut(n.W);
    EXPECT_GT(eq.min_S, 0.0);
    EXPECT_LT(eq.mass_residual, 1e-10);
    // Coefficient decay: S is quadratic here, so index 64 is far below 1e-10.
    auto s = cheb_coeffs([&](double x) { return density_S(n.W, x); }, 80);
    EXPECT_LT(std::abs(s.coeffs[64]), 1e-10);
    // Q is constant on J and the outside gap is nonnegative.
    EXPECT_LT(eq.q_residual, 1e-8);
    EXPECT_GE(eq.min_outside_gap, -1e-8);
}

TEST(VerifyOneCut, LogPotentialMatchesQuadratureOracle) {
    auto eq = verify_one_cut(make_potential("quartic(0.5)"));
    for (double x : {-0.8, -0.25, 0.0, 0.6}) EXPECT_NEAR(eq.log_potential(x), log_potential_oracle(eq, x), 1e-8) << x;
    auto q = quad_rule(Measure::Semicircle, 4000);
    for (double x : {-1.2, 1.1, 1.25}) {
        double acc = 0.0;
        for (std::size_t j = 0; j < q.nodes.size(); ++j) acc += q.weights[j] * eq.S(q.nodes[j]) * std::log(std::abs(x - q.nodes[j]));
        EXPECT_NEAR(eq.log_potential(x), acc, 1e-8) << x;
    }
}

TEST(VerifyOneCut, EffectivePotentialDerivative) {
    auto eq = verify_one_cut(make_potential("quartic(0.5)"));
    for (double x : {-1.2, -1.05, 1.02, 1.2}) {
        const double h = 1e-5;
        EXPECT_NEAR(eq.dQ(x), (eq.Q(x + h) - eq.Q(x - h)) / (2 * h), 1e-6);
        EXPECT_GT(std::copysign(1.0, x) * eq.dQ(x), 0.0);
    }
}

TEST(Normalize, Examples) {
    auto a = normalize_potential(gaussian_potential());
    EXPECT_NEAR(a.c, 0.0, 1e-12);
    EXPECT_NEAR(a.r, 1.0, 1e-12);
    auto b = normalize_potential(polynomial_potential("sq", {9, -6, 1}));
    EXPECT_NEAR(b.c, 3.0, 1e-10);
    EXPECT_NEAR(b.r, 1.0, 1e-10);
    auto c = normalize_potential(polynomial_potential("x4", {0, 0, 0, 0, 1}));
    EXPECT_NEAR(c.c, 0.0, 1e-10);
    // ∫ x W' dϱ = 4r⁴∫x⁴dϱ = (3/2)r⁴.
    EXPECT_NEAR(c.r, std::pow(2.0 / 3.0, 0.25), 1e-10);
    EXPECT_NO_THROW((void)verify_one_cut(c.W));
}

TEST(Normalize, NonPolynomialPotential) {
    Potential raw;
    raw.name = "cosh";
    raw.d = [](double x, int r) { return r % 2 ? std::sinh(x - 0.4) : std::cosh(x - 0.4); };
    auto n = normalize_potential(raw);
    EXPECT_NEAR(n.c, 0.4, 1e-9);
    auto eq = verify_one_cut(n.W);
    EXPECT_GT(eq.min_S, 0.0);
}

TEST(Normalize, FlatPotentialIsRejected) {
    EXPECT_THROW((void)normalize_potential(polynomial_potential("lin", {0, 1})), NumericalError);
}

TEST(ClassicalLocations, Semicircle) {
    auto eq = verify_one_cut(gaussian_potential());
    auto rho = classical_locations(eq, 8);
    EXPECT_EQ(rho.front(), -1.0);
    EXPECT_EQ(rho.back(), 1.0);
    EXPECT_NEAR(rho[4], 0.0, 1e-14);
    // Analytic CDF ½ + (x√(1-x²) + arcsin x)/π solved by bisection.
    auto F = [](double x) { return 0.5 + (x * std::sqrt(1 - x * x) + std::asin(x)) / pi; };
    double lo = -1, hi = 1;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (F(mid) < 0.25 ? lo : hi) = mid;
    }
    auto rho4 = classical_locations(eq, 4);
    EXPECT_NEAR(rho4[1], 0.5 * (lo + hi), 1e-13);
}

TEST(ClassicalLocations, QuarticCdfOracle) {
    auto eq = verify_one_cut(make_potential("quartic(1)"));
    const int N = 37;
    auto rho = classical_locations(eq, N);
    for (int j = 1; j <= N; ++j) EXPECT_GT(rho[j], rho[j - 1]);
    for (int j = 1; j < N; ++j) {
        EXPECT_NEAR(eq.cdf(rho[j]), static_cast<double>(j) / N, 1e-12);
        EXPECT_NEAR(cdf_oracle(eq, rho[j]), static_cast<double>(j) / N, 1e-10);
    }
}

TEST(MeanM, GaussianExamples) {
    auto eq = verify_one_cut(gaussian_potential());
    EXPECT_NEAR(mean_m(fn::chebyshev_t(2), eq), 1.0, 1e-12);
    EXPECT_NEAR(mean_m(fn::chebyshev_t(1), eq), 0.0, 1e-12);
    // For S ≡ 1, 𝐦(T_k) = ½(1 + (-1)^k).
    for (int k = 3; k <= 8; ++k) EXPECT_NEAR(mean_m(fn::chebyshev_t(k), eq), k % 2 ? 0.0 : 1.0, 1e-12);
}

TEST(MeanM, Linearity) {
    auto eq = verify_one_cut(make_potential("quartic(0.3)"));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2);
    auto f = fn::exponential(0.7), g = fn::sine(1.3);
    for (int t = 0; t < 5; ++t) {
        const double a = u(rng), b = u(rng);
        auto h = fn::combine(a, f, b, g);
        EXPECT_NEAR(mean_m(h, eq), a * mean_m(f, eq) + b * mean_m(g, eq), 1e-10);
    }
}

TEST(MeanM, QuarticAgainstSeriesForm) {
    // Same formula with the inner divided difference replaced by the Chebyshev series of U(f).
    auto eq = verify_one_cut(make_potential("quartic(1)"));
    auto f = fn::cosine(1.5);
    auto series = cheb_coeffs(f, 40);
    ChebSeries centred = series;
    centred.coeffs[0] = 0.0;
    auto qo = quad_rule(Measure::Semicircle, 200);
    double corr = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double x = qo.nodes[i];
        corr += qo.weights[i] * eq.dS(x) / eq.S(x) * finite_hilbert(centred, x);
    }
    const double want = 0.5 * (f(1) + f(-1) - 2.0 * std::cyl_bessel_j(0.0, 1.5) - corr);
    EXPECT_NEAR(mean_m(f, eq), want, 1e-10);
}

TEST(Registry, PotentialSpecs) {
    EXPECT_EQ(make_potential("gaussian").name, "gaussian");
    EXPECT_NO_THROW((void)verify_one_cut(make_potential("quartic(0.2)")));
    EXPECT_NO_THROW((void)verify_one_cut(make_potential("poly(0, 0.1, 1, 0, 0.2)")));
    EXPECT_THROW((void)make_potential("sextic"), SpecError);
    EXPECT_THROW((void)make_potential("quartic(a)"), SpecError);
    EXPECT_THROW((void)make_potential("quartic(1"), SpecError);
}

TEST(Registry, FunctionSpecs) {
    EXPECT_DOUBLE_EQ(make_function("x2")(0.5), 0.25);
    EXPECT_NEAR(make_function("T(3)")(0.5), -1.0, 1e-15);
    EXPECT_NEAR(make_function("exp(2)").d1(0.0), 2.0, 1e-15);
    EXPECT_THROW((void)make_function("T(1.5)"), SpecError);
}
