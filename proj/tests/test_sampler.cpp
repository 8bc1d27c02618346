#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "betaclt/registry.hpp"
#include "betaclt/sampler.hpp"

using namespace betaclt;

namespace {

Potential zero_potential() { return polynomial_potential("zero", {0.0}); }

std::vector<double> random_config(int N, std::uint64_t seed) {
    Engine rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> l(N);
    for (auto& x : l) x = u(rng);
    return l;
}

const EquilibriumData& gaussian_eq() {
    static const EquilibriumData eq = verify_one_cut(gaussian_potential());
    return eq;
}

}  // namespace

TEST(Hamiltonian, SinglePointIsPotential) {
    EXPECT_NEAR(hamiltonian({0.3}, gaussian_potential()), 0.09, 1e-15);
}

TEST(Hamiltonian, UnitGapWithoutPotentialIsZero) {
    EXPECT_NEAR(hamiltonian({0.0, 1.0}, zero_potential()), 0.0, 1e-15);
}

TEST(Hamiltonian, TwoPointArithmetic) {
    EXPECT_NEAR(hamiltonian({0.0, 0.5}, gaussian_potential()), std::log(2.0) + 0.5, 1e-14);
}

TEST(Hamiltonian, CoincidentPointsGiveInfinity) {
    EXPECT_TRUE(std::isinf(hamiltonian({0.2, 0.2, 0.5}, gaussian_potential())));
}

TEST(Hamiltonian, BlockedLogsMatchNaiveSum) {
    const auto V = make_potential("quartic(0.5)");
    const auto l = random_config(70, 3);
    double naive = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
        naive += 70.0 * V(l[i]);
        for (std::size_t j = i + 1; j < l.size(); ++j) naive -= std::log(std::abs(l[i] - l[j]));
    }
    EXPECT_NEAR(hamiltonian(l, V), naive, 1e-11 * std::abs(naive));
}

TEST(Hamiltonian, PermutationInvariant) {
    const auto V = make_potential("quartic(0.5)");
    auto l = random_config(9, 5);
    const double h = hamiltonian(l, V);
    std::reverse(l.begin(), l.end());
    std::rotate(l.begin(), l.begin() + 4, l.end());
    EXPECT_NEAR(hamiltonian(l, V), h, 1e-12 * std::abs(h));
}

TEST(GradLogDensity, InteractionPartSumsToZero) {
    const auto l = random_config(12, 8);
    const auto g = grad_log_density(l, zero_potential(), 2.0);
    EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 0.0, 1e-10);
}

TEST(GradLogDensity, SinglePoint) {
    const auto V = gaussian_potential();
    const auto g = grad_log_density({0.4}, V, 3.0);
    EXPECT_NEAR(g[0], -3.0 * 0.8, 1e-15);
}

TEST(GradLogDensity, MatchesCentralDifferenceOfHamiltonian) {
    const auto V = make_potential("quartic(1)");
    const double beta = 1.5;
    for (int N : {2, 5, 8}) {
        const auto l = random_config(N, 100 + N);
        const auto g = grad_log_density(l, V, beta);
        for (int j = 0; j < N; ++j) {
            const double h = 1e-6;
            auto p = l, m = l;
            p[j] += h;
            m[j] -= h;
            const double fd = -beta * (hamiltonian(p, V) - hamiltonian(m, V)) / (2.0 * h);
            EXPECT_NEAR(g[j], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "N=" << N << " j=" << j;
        }
    }
}

TEST(Tridiagonal, PowerSumsMatchEigenvalues) {
    auto rng = make_engine(11);
    for (int N : {1, 2, 7, 40}) {
        const auto t = draw_tridiagonal(N, 2.0, rng);
        const auto ev = tridiagonal_eigenvalues(t);
        const auto p = tridiagonal_power_sums(t, 8);
        for (int k = 0; k <= 8; ++k) {
            double s = 0.0;
            for (double x : ev) s += std::pow(x, k);
            EXPECT_NEAR(p[k], s, 1e-11 * std::max(1.0, std::abs(s))) << "N=" << N << " k=" << k;
        }
    }
}

TEST(Tridiagonal, SinglePointVariance) {
    SamplerConfig cfg;
    cfg.N = 1;
    cfg.beta = 2.0;
    cfg.M = 100000;
    cfg.seed = 1;
    std::vector<double> x;
    sample_gaussian_beta(cfg, [&](const std::vector<double>& l) { x.push_back(l[0]); });
    // Density e^{-βNλ²}: variance 1/(2βN); the sample variance has sd ≈ v√(2/M).
    const double v = 1.0 / (2.0 * cfg.beta * cfg.N);
    EXPECT_NEAR(variance_of(x), v, 3.0 * v * std::sqrt(2.0 / cfg.M));
}

TEST(Tridiagonal, SecondMomentMatchesSemicircle) {
    SamplerConfig cfg;
    cfg.N = 256;
    cfg.M = 10000;
    cfg.seed = 2;
    std::vector<double> s;
    sample_gaussian_beta_power_sums(cfg, 2, [&](const std::vector<double>& p) { s.push_back(p[2]); });
    EXPECT_NEAR(mean_of(s), cfg.N * 0.25, 0.01 * cfg.N * 0.25);
}

TEST(Tridiagonal, ChiSquareLawOfSecondPowerSum) {
    // Σλ² = χ²_k / (2βN) with k = N + βN(N-1)/2.
    for (double beta : {1.0, 2.0, 4.0}) {
        SamplerConfig cfg;
        cfg.N = 24;
        cfg.beta = beta;
        cfg.M = 40000;
        cfg.seed = 9;
        std::vector<double> s;
        sample_gaussian_beta_power_sums(cfg, 2, [&](const std::vector<double>& p) { s.push_back(p[2]); });
        const double N = cfg.N, k = N + beta * N * (N - 1) / 2, c = 1.0 / (2 * beta * N);
        const double mean = c * k, var = c * c * 2 * k;
        EXPECT_NEAR(mean_of(s), mean, 4.0 * std::sqrt(var / cfg.M)) << "beta=" << beta;
        EXPECT_NEAR(variance_of(s), var, 4.0 * var * std::sqrt(2.0 / cfg.M)) << "beta=" << beta;
    }
}

TEST(Tridiagonal, SeedDeterminism) {
    SamplerConfig cfg;
    cfg.N = 16;
    cfg.M = 5;
    cfg.seed = 77;
    const auto a = collect_gaussian_beta(cfg), b = collect_gaussian_beta(cfg);
    EXPECT_EQ(a.samples, b.samples);
    cfg.seed = 78;
    EXPECT_NE(collect_gaussian_beta(cfg).samples, a.samples);
}

TEST(Tridiagonal, RejectsNonPositiveBeta) {
    SamplerConfig cfg;
    cfg.beta = 0.0;
    EXPECT_THROW(sample_gaussian_beta(cfg, [](const std::vector<double>&) {}), std::invalid_argument);
}

TEST(Tridiagonal, SamplesSorted) {
    SamplerConfig cfg;
    cfg.N = 50;
    cfg.M = 20;
    for (const auto& l : collect_gaussian_beta(cfg).samples) EXPECT_TRUE(std::is_sorted(l.begin(), l.end()));
}

TEST(MetropolisHastings, DetailedBalanceOnDiscretizedToy) {
    // N = 2 on three states, with a Langevin proposal restricted and renormalized to the states.
    const auto V = make_potential("quartic(0.5)");
    const double beta = 2.0, h = 0.05;
    const std::vector<std::vector<double>> X{{-0.5, 0.2}, {-0.3, 0.4}, {-0.6, 0.6}};
    std::vector<double> lp(3);
    for (int i = 0; i < 3; ++i) lp[i] = -beta * hamiltonian(X[i], V);
    double Q[3][3];
    for (int i = 0; i < 3; ++i) {
        const auto g = grad_log_density(X[i], V, beta);
        double z = 0.0;
        for (int j = 0; j < 3; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < 2; ++c) {
                const double d = X[j][c] - X[i][c] - 0.5 * h * g[c];
                d2 += d * d;
            }
            Q[i][j] = std::exp(-d2 / (2 * h));
            z += Q[i][j];
        }
        for (int j = 0; j < 3; ++j) Q[i][j] /= z;
    }
    double P[3][3];
    for (int i = 0; i < 3; ++i) {
        double stay = 1.0;
        for (int j = 0; j < 3; ++j) {
            if (j == i) continue;
            P[i][j] = Q[i][j] * mh_accept_prob(lp[i], lp[j], std::log(Q[i][j]), std::log(Q[j][i]));
            stay -= P[i][j];
        }
        P[i][i] = stay;
    }
    const double lmax = *std::max_element(lp.begin(), lp.end());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double a = std::exp(lp[i] - lmax) * P[i][j], b = std::exp(lp[j] - lmax) * P[j][i];
            EXPECT_NEAR(a, b, 1e-12);
        }
}

TEST(Mala, ZeroStepStaysWithFullAcceptance) {
    SamplerConfig cfg;
    cfg.N = 6;
    cfg.M = 10;
    cfg.burn_in = 100;
    cfg.step = 0.0;
    cfg.thin = 3;
    std::vector<std::vector<double>> out;
    const auto st = sample_mcmc(gaussian_eq(), cfg, [&](const std::vector<double>& l) { out.push_back(l); });
    EXPECT_EQ(st.acceptance, 1.0);
    for (const auto& l : out) EXPECT_EQ(l, out.front());
}

TEST(Mala, AbortsWhenAcceptanceCollapses) {
    SamplerConfig cfg;
    cfg.N = 8;
    cfg.M = 10;
    cfg.burn_in = 200;
    cfg.step = 50.0;
    cfg.adapt = false;
    EXPECT_THROW((void)sample_mcmc(gaussian_eq(), cfg, [](const std::vector<double>&) {}), SamplerError);
}

TEST(Mala, SeedDeterminism) {
    SamplerConfig cfg;
    cfg.N = 10;
    cfg.M = 20;
    cfg.seed = 5;
    cfg.thin = 2;
    const auto a = collect_mcmc(gaussian_eq(), cfg), b = collect_mcmc(gaussian_eq(), cfg);
    EXPECT_EQ(a.samples, b.samples);
}

TEST(Mala, MatchesTridiagonalMomentsAtN32) {
    const int N = 32;
    SamplerConfig cfg;
    cfg.N = N;
    cfg.M = 10000;
    cfg.seed = 21;
    MCMCStats st;
    const auto mc = collect_mcmc(gaussian_eq(), cfg, &st);
    EXPECT_GT(st.acceptance, 0.3);
    std::vector<double> s1, s2;
    for (const auto& l : mc.samples) {
        double a = 0, b = 0;
        for (double x : l) {
            a += x;
            b += x * x;
        }
        s1.push_back(a);
        s2.push_back(b);
    }
    cfg.M = 40000;
    std::vector<double> t1, t2;
    sample_gaussian_beta_power_sums(cfg, 2, [&](const std::vector<double>& p) {
        t1.push_back(p[1]);
        t2.push_back(p[2]);
    });
    auto check = [](const std::vector<double>& a, const std::vector<double>& b, const char* what) {
        const double se = std::hypot(batch_means_se(a), batch_means_se(b));
        EXPECT_NEAR(mean_of(a), mean_of(b), 3.0 * se) << what;
        const double sv = std::hypot(variance_se(a), variance_se(b));
        EXPECT_NEAR(variance_of(a), variance_of(b), 3.0 * sv) << what;
    };
    check(s1, t1, "sum");
    check(s2, t2, "sum of squares");
}

TEST(Mala, IdentityPreconditionerRuns) {
    SamplerConfig cfg;
    cfg.N = 8;
    cfg.M = 200;
    cfg.precond = Preconditioner::Identity;
    cfg.thin = 5;
    const auto st = sample_mcmc(gaussian_eq(), cfg, [](const std::vector<double>&) {});
    EXPECT_GT(st.acceptance, 0.2);
    EXPECT_LT(st.acceptance, 0.95);
}

TEST(LinearStatistic, ConstantIsZero) {
    const auto l = random_config(20, 4);
    EXPECT_NEAR(linear_statistic(fn::constant(2.5), l, gaussian_eq()), 0.0, 1e-12);
}

TEST(LinearStatistic, FirstChebyshevIsSum) {
    const auto l = random_config(20, 4);
    EXPECT_NEAR(linear_statistic(fn::chebyshev_t(1), l, gaussian_eq()), std::accumulate(l.begin(), l.end(), 0.0), 1e-12);
}

TEST(LinearStatistic, PowerSumPathAgrees) {
    auto rng = make_engine(3);
    const auto t = draw_tridiagonal(30, 2.0, rng);
    const LinearStatistic s(fn::chebyshev_t(4), gaussian_eq());
    EXPECT_NEAR(s.from_power_sums(tridiagonal_power_sums(t, 4)), s(tridiagonal_eigenvalues(t)), 1e-11);
}

TEST(LinearStatistic, PermutationInvariant) {
    auto l = random_config(15, 6);
    const LinearStatistic s(fn::exponential(0.7), gaussian_eq());
    const double a = s(l);
    std::shuffle(l.begin(), l.end(), Engine(1));
    EXPECT_NEAR(s(l), a, 1e-12);
}

TEST(Rigidity, ClassicalLocationsAreInEvent) {
    const int N = 40;
    const auto rho = classical_locations(gaussian_eq(), N);
    const std::vector<double> l(rho.begin() + 1, rho.end());
    const auto r = rigidity_fraction({l}, rho, 0.05);
    EXPECT_TRUE(r.in_event[0]);
    EXPECT_EQ(r.violation_fraction, 0.0);
}

TEST(Rigidity, ShiftedEdgeViolates) {
    const int N = 40;
    const double eps = 0.1;
    const auto rho = classical_locations(gaussian_eq(), N);
    std::vector<double> l(rho.begin() + 1, rho.end());
    l[0] -= 2.0 * std::pow(N, -2.0 / 3.0 + eps);
    const auto r = rigidity_fraction({l}, rho, eps);
    EXPECT_FALSE(r.in_event[0]);
    EXPECT_EQ(r.worst_index, 1);
    EXPECT_EQ(r.violation_fraction, 1.0);
}

TEST(Rigidity, GueViolationFractionFallsWithEpsilon) {
    // At N = 256 the band ĵ^{-1/3}N^{-2/3+ε} is comparable to bulk fluctuations for ε = 0.1;
    // the fraction must fall monotonically and be negligible by ε = 0.3.
    SamplerConfig cfg;
    cfg.N = 256;
    cfg.M = 1000;
    cfg.seed = 13;
    const auto s = collect_gaussian_beta(cfg);
    double prev = 1.0;
    for (double eps : {0.1, 0.2, 0.3}) {
        const auto r = rigidity_fraction(s.samples, gaussian_eq(), eps);
        EXPECT_LE(r.violation_fraction, prev) << "eps=" << eps;
        prev = r.violation_fraction;
    }
    EXPECT_LE(prev, 0.01);
}

TEST(SampleCsv, HeaderAndRows) {
    SamplerConfig cfg;
    cfg.N = 3;
    cfg.M = 2;
    cfg.seed = 4;
    std::ostringstream os;
    write_samples_csv(os, collect_gaussian_beta(cfg));
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "# N=3 beta=2 potential=gaussian seed=4");
    std::getline(is, line);
    EXPECT_EQ(line, "lambda_1,lambda_2,lambda_3");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 2);
}
