#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "betaclt/chebyshev.hpp"
#include "betaclt/eigenbasis.hpp"
#include "betaclt/equilibrium.hpp"
#include "betaclt/rng.hpp"
#include "betaclt/sampler.hpp"
#include "betaclt/stats.hpp"
#include "betaclt/stein.hpp"

namespace betaclt {

class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct W2Estimate {
    double estimate = 0.0;
    double error = 0.0;  ///< RMS of W₂(bootstrap resample, sample): the resolution of a size-M sample
};

namespace detail {

inline std::vector<double> sorted_finite(std::vector<double> x, const char* who) {
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite sample");
    std::sort(x.begin(), x.end());
    return x;
}

/// Bootstrap resamples of a sorted sample, kept sorted by drawing multiplicities instead of values.
inline double bootstrap_floor(const std::vector<double>& sorted, int resamples, std::uint64_t seed) {
    const std::size_t M = sorted.size();
    auto rng = make_engine(seed, 0xB007);
    std::uniform_int_distribution<std::size_t> pick(0, M - 1);
    std::vector<std::uint32_t> count(M);
    CompensatedSum ms;
    for (int b = 0; b < resamples; ++b) {
        std::fill(count.begin(), count.end(), 0u);
        for (std::size_t i = 0; i < M; ++i) ++count[pick(rng)];
        double acc = 0.0;
        std::size_t pos = 0;
        for (std::size_t j = 0; j < M; ++j)
            for (std::uint32_t c = 0; c < count[j]; ++c, ++pos) {
                const double d = sorted[j] - sorted[pos];
                acc += d * d;
            }
        ms.add(acc / static_cast<double>(M));
    }
    return std::sqrt(ms.value() / resamples);
}

}  // namespace detail

/// Quantile-coupling W₂ of the empirical law to N(0,1), midpoint plotting positions.
[[nodiscard]] inline W2Estimate empirical_w2_gaussian(const std::vector<double>& samples, int resamples = 200, std::uint64_t seed = 0x5EED) {
    if (samples.size() < 100) throw std::invalid_argument("empirical_w2_gaussian: need at least 100 samples");
    const auto x = detail::sorted_finite(samples, "empirical_w2_gaussian");
    const std::size_t M = x.size();
    CompensatedSum s;
    for (std::size_t i = 0; i < M; ++i) {
        const double d = x[i] - normal_quantile((i + 0.5) / static_cast<double>(M));
        s.add(d * d);
    }
    return {std::sqrt(s.value() / static_cast<double>(M)), detail::bootstrap_floor(x, resamples, seed)};
}

/// W₂ between two empirical laws via their quantile functions; the error combines both resolutions.
[[nodiscard]] inline W2Estimate empirical_w2_two_sample(const std::vector<double>& a, const std::vector<double>& b, int resamples = 200, std::uint64_t seed = 0x5EED) {
    if (a.size() < 100 || b.size() < 100) throw std::invalid_argument("empirical_w2_two_sample: need at least 100 samples each");
    const auto x = detail::sorted_finite(a, "empirical_w2_two_sample"), y = detail::sorted_finite(b, "empirical_w2_two_sample");
    const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    // Walk the merged breakpoints of the two step quantile functions.
    std::size_t i = 0, j = 0;
    double u = 0.0;
    CompensatedSum s;
    while (i < x.size() && j < y.size()) {
        const double next = std::min((i + 1) / nx, (j + 1) / ny);
        const double d = x[i] - y[j];
        s.add((next - u) * d * d);
        u = next;
        if ((i + 1) / nx <= next) ++i;
        if ((j + 1) / ny <= next) ++j;
    }
    const double ex = detail::bootstrap_floor(x, resamples, seed), ey = detail::bootstrap_floor(y, resamples, seed + 1);
    return {std::sqrt(s.value()), std::hypot(ex, ey)};
}

/// Analytic constants that turn ∫f dν_N into X_N(f).
struct Standardization {
    double sigma = 0.0;  ///< Σ(f)
    double mean = 0.0;   ///< 𝐦(f)
    double mu_f = 0.0;   ///< ∫ f dμ_V
    double beta = 2.0;

    /// Limiting mean of ∫f dν_N, (1/β - 1/2)𝐦(f).
    [[nodiscard]] double centering() const { return (1.0 / beta - 0.5) * mean; }
    [[nodiscard]] double scale() const { return std::sqrt(beta / (2.0 * sigma)); }
    [[nodiscard]] double operator()(double centered_linstat) const { return scale() * (centered_linstat - centering()); }
};

[[nodiscard]] inline Standardization standardization(const TestFunction& f, const EquilibriumData& eq, double beta) {
    Standardization s;
    s.sigma = sigma_variance(f, SigmaMethod::Fourier, 128);
    if (!(s.sigma >= 1e-10))
        throw ExperimentError("Sigma(" + f.name + ") = " + std::to_string(s.sigma) + " is below 1e-10; f is numerically constant on [-1,1] and cannot be standardized");
    s.mean = mean_m(f, eq);
    s.mu_f = mu_integral(f, eq);
    s.beta = beta;
    return s;
}

/// True when V is exactly x², where the tridiagonal model samples exactly.
[[nodiscard]] inline bool is_gaussian_potential(const Potential& V) {
    const auto& c = V.monomials;
    if (c.size() < 3) return false;
    for (std::size_t m = 0; m < c.size(); ++m)
        if (c[m] != (m == 2 ? 1.0 : 0.0)) return false;
    return true;
}

enum class SamplerKind { Auto, Tridiagonal, MCMC };

struct RunConfig {
    int N = 64;
    double beta = 2.0;
    int M = 1000;
    std::uint64_t seed = 0;
    SamplerKind sampler = SamplerKind::Auto;
    SamplerConfig mcmc;  ///< thin, burn_in, step, adapt, chains, precond for the MCMC path; N, beta, M, seed are overridden
};

namespace detail {

inline bool use_tridiagonal(const EquilibriumData& eq, const RunConfig& rc) {
    const bool gauss = is_gaussian_potential(eq.V);
    if (rc.sampler == SamplerKind::Tridiagonal && !gauss) throw ExperimentError("the tridiagonal sampler is exact only for V = x^2");
    return rc.sampler == SamplerKind::Tridiagonal || (rc.sampler == SamplerKind::Auto && gauss);
}

inline SamplerConfig sampler_config(const RunConfig& rc) {
    SamplerConfig c = rc.mcmc;
    c.N = rc.N;
    c.beta = rc.beta;
    c.M = rc.M;
    c.seed = rc.seed;
    return c;
}

}  // namespace detail

/// Streams M configurations from the sampler RunConfig selects. Returns MCMC diagnostics when MCMC ran.
inline std::optional<MCMCStats> draw_configurations(const EquilibriumData& eq, const RunConfig& rc, const ConfigurationSink& emit) {
    const auto cfg = detail::sampler_config(rc);
    if (detail::use_tridiagonal(eq, rc)) {
        sample_gaussian_beta(cfg, emit);
        return std::nullopt;
    }
    return sample_mcmc(eq, cfg, emit);
}

struct CltReport {
    std::string potential, function;
    int N = 0;
    double beta = 0.0;
    int M = 0;
    std::uint64_t seed = 0;
    std::string sampler;
    Standardization standard;
    std::vector<double> linstat;  ///< ∫f dν_N per sample
    std::vector<double> X;        ///< X_N(f) per sample
    double linstat_mean = 0.0, linstat_mean_se = 0.0;
    double linstat_var = 0.0, linstat_var_se = 0.0;
    Moments moments;              ///< of X
    W2Estimate w2;
    std::optional<SteinEstimate> stein;
    std::optional<MCMCStats> mcmc;
    /// Limiting mean and variance of ∫f dν_N.
    [[nodiscard]] double target_mean() const { return standard.centering(); }
    [[nodiscard]] double target_variance() const { return 2.0 * standard.sigma / beta; }
};

/// X_N(f) = √(β/(2Σ(f)))(∫f dν_N - (1/β - 1/2)𝐦(f)) over M configurations, with moments, W₂ to γ_1, and optional Stein modes.
[[nodiscard]] inline CltReport clt_experiment(const EquilibriumData& eq, const TestFunction& f, const RunConfig& rc, const std::vector<ModeSpec>& stein_modes = {}) {
    CltReport r;
    r.potential = eq.V.name;
    r.function = f.name;
    r.N = rc.N;
    r.beta = rc.beta;
    r.M = rc.M;
    r.seed = rc.seed;
    r.standard = standardization(f, eq, rc.beta);
    const LinearStatistic stat(f, r.standard.mu_f);
    std::optional<SteinAccumulator> acc;
    if (!stein_modes.empty()) acc.emplace(stein_modes, rc.N, rc.beta);
    r.linstat.reserve(rc.M);

    const bool tri = detail::use_tridiagonal(eq, rc);
    bool fast = tri && f.is_polynomial();
    for (const auto& m : stein_modes) fast = fast && m.phi.is_polynomial();
    if (fast) {
        r.sampler = "tridiagonal-power-sums";
        int kmax = static_cast<int>(f.monomials.size()) - 1;
        if (!stein_modes.empty()) kmax = std::max(kmax, power_sum_order(stein_modes, eq.V));
        sample_gaussian_beta_power_sums(detail::sampler_config(rc), kmax, [&](const std::vector<double>& p) {
            r.linstat.push_back(stat.from_power_sums(p));
            if (acc) acc->add(evaluate_modes_power_sums(stein_modes, p, eq.V, rc.beta));
        });
    } else {
        r.sampler = tri ? "tridiagonal" : "mcmc";
        r.mcmc = draw_configurations(eq, rc, [&](const std::vector<double>& l) {
            r.linstat.push_back(stat(l));
            if (acc) acc->add(evaluate_modes(stein_modes, l, eq.V, rc.beta));
        });
    }
    r.X.reserve(r.linstat.size());
    for (double v : r.linstat) r.X.push_back(r.standard(v));
    r.linstat_mean = mean_of(r.linstat);
    r.linstat_mean_se = batch_means_se(r.linstat);
    r.linstat_var = variance_of(r.linstat);
    r.linstat_var_se = variance_se(r.linstat);
    r.moments = moments_of(r.X);
    r.w2 = empirical_w2_gaussian(r.X, 200, derive_seed(rc.seed, 0xC17));
    if (acc) {
        r.stein = acc->result();
        r.stein->potential = eq.V.name;
    }
    return r;
}

/// ∫x² dν_N under GβE drawn directly from its χ² law: Σλ_j² ~ χ²_{N+βN(N-1)/2}/(2βN).
[[nodiscard]] inline std::vector<double> gaussian_x2_chi2_samples(int N, double beta, int M, std::uint64_t seed) {
    const double dof = N + beta * N * (N - 1) / 2.0;
    auto rng = make_engine(seed, 0xC42);
    std::chi_squared_distribution<double> chi(dof);
    std::vector<double> out(M);
    for (auto& v : out) v = chi(rng) / (2.0 * beta * N) - N * 0.25;
    return out;
}

struct RateFitResult {
    std::vector<int> N;
    std::vector<double> w2, w2_err;
    std::vector<CltReport> reports;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double slope_se = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double theta_reference = 0.0;  ///< expected exponent of N^{-θ}: 1 for V = x², min{(2κ-9)/(2κ+11), 2/3} otherwise
    bool refused = false;
    std::string refusal_reason;
};

struct LineFit {
    double slope = 0.0, intercept = 0.0, slope_se = 0.0;
};

/// Weighted least squares y = a + b x with weights w.
[[nodiscard]] inline LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (!(det > 0)) throw ExperimentError("weighted_line_fit: degenerate design");
    LineFit f;
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / sw;
    f.slope_se = std::sqrt(sw / det);
    return f;
}

/// Log-log slope of W₂(X_N(f), γ_1) over an N-grid. The fit is still computed when refused, for diagnostics.
[[nodiscard]] inline RateFitResult rate_fit(const EquilibriumData& eq, const TestFunction& f, const std::vector<int>& grid, const RunConfig& base) {
    if (grid.size() < 4) throw ExperimentError("rate_fit: need at least 4 values of N");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1]) throw ExperimentError("rate_fit: N-grid must be increasing");
    RateFitResult res;
    res.theta_reference = is_gaussian_potential(eq.V) ? 1.0 : std::min((2.0 * eq.V.kappa - 9.0) / (2.0 * eq.V.kappa + 11.0), 2.0 / 3.0);
    std::vector<double> lx, ly, w;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        RunConfig rc = base;
        rc.N = grid[i];
        rc.seed = derive_seed(base.seed, grid[i]);
        auto rep = clt_experiment(eq, f, rc);
        res.N.push_back(grid[i]);
        res.w2.push_back(rep.w2.estimate);
        res.w2_err.push_back(rep.w2.error);
        lx.push_back(std::log(grid[i]));
        ly.push_back(std::log(rep.w2.estimate));
        const double rel = rep.w2.error / rep.w2.estimate;
        w.push_back(1.0 / (rel * rel));
        res.reports.push_back(std::move(rep));
    }
    const auto fit = weighted_line_fit(lx, ly, w);
    res.slope = fit.slope;
    res.slope_se = fit.slope_se;
    res.intercept = fit.intercept;
    if (res.w2.back() < 2.0 * res.w2_err.back()) {
        res.refused = true;
        res.refusal_reason = "W2 at N = " + std::to_string(res.N.back()) + " is " + std::to_string(res.w2.back()) +
                             ", below twice its Monte Carlo resolution " + std::to_string(res.w2_err.back()) + "; the slope measures noise";
    }
    return res;
}

struct JointReport {
    int d = 0;
    Eigen::MatrixXd covariance;     ///< empirical covariance of (F_n)
    Eigen::MatrixXd covariance_se;  ///< batch-means errors of the second moments
    std::vector<W2Estimate> coordinate_w2;
    std::vector<Eigen::VectorXd> directions;
    std::vector<W2Estimate> projection_w2;
    SteinEstimate stein;
};

/// Covariance, coordinate and projection W₂, and the Stein bound for (X_N(φ_n))_{n≤d}.
[[nodiscard]] inline JointReport joint_clt_check(const EquilibriumData& eq, const std::vector<ModeSpec>& modes, const RunConfig& rc, int projections = 4) {
    const int d = static_cast<int>(modes.size());
    if (d < 1 || d > 4) throw ExperimentError("joint_clt_check: d must be between 1 and 4");
    SteinAccumulator acc(modes, rc.N, rc.beta);
    std::vector<std::vector<double>> F(d);
    auto take = [&](const GeneratorSample& g) {
        acc.add(g);
        for (int n = 0; n < d; ++n) F[n].push_back(g.F[n]);
    };
    bool fast = detail::use_tridiagonal(eq, rc);
    for (const auto& m : modes) fast = fast && m.phi.is_polynomial();
    if (fast)
        sample_gaussian_beta_power_sums(detail::sampler_config(rc), power_sum_order(modes, eq.V),
                                        [&](const std::vector<double>& p) { take(evaluate_modes_power_sums(modes, p, eq.V, rc.beta)); });
    else
        (void)draw_configurations(eq, rc, [&](const std::vector<double>& l) { take(evaluate_modes(modes, l, eq.V, rc.beta)); });

    JointReport r;
    r.d = d;
    r.covariance.resize(d, d);
    r.covariance_se.resize(d, d);
    std::vector<double> mu(d);
    for (int n = 0; n < d; ++n) mu[n] = mean_of(F[n]);
    const std::size_t M = F[0].size();
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            std::vector<double> prod(M);
            for (std::size_t i = 0; i < M; ++i) prod[i] = (F[a][i] - mu[a]) * (F[b][i] - mu[b]);
            r.covariance(a, b) = r.covariance(b, a) = mean_of(prod) * M / (M - 1.0);
            r.covariance_se(a, b) = r.covariance_se(b, a) = batch_means_se(prod);
        }
    const std::uint64_t wseed = derive_seed(rc.seed, 0x1017);
    for (int n = 0; n < d; ++n) r.coordinate_w2.push_back(empirical_w2_gaussian(F[n], 200, wseed + n));
    auto rng = make_engine(rc.seed, 0xD1A);
    std::normal_distribution<double> z;
    for (int k = 0; k < projections; ++k) {
        Eigen::VectorXd u(d);
        for (int n = 0; n < d; ++n) u[n] = z(rng);
        u.normalize();
        std::vector<double> proj(M, 0.0);
        for (std::size_t i = 0; i < M; ++i)
            for (int n = 0; n < d; ++n) proj[i] += u[n] * F[n][i];
        r.directions.push_back(u);
        r.projection_w2.push_back(empirical_w2_gaussian(proj, 200, wseed + 100 + k));
    }
    r.stein = acc.result();
    r.stein.potential = eq.V.name;
    return r;
}

struct TruncationRow {
    int d = 0;
    double gap_second_moment = 0.0;  ///< E[(X_N(f) - X_N-analog of g_d)²]
    double gap_se = 0.0;
    double sup_error = 0.0;          ///< sup over [-1,1] of |f - f̂_0 - g_d|
};

struct TruncationReport {
    std::string function;
    std::vector<TruncationRow> rows;
};

/// Gap between X_N(f) and the same standardization applied to ∫g_d dν_N, for each d in the grid.
[[nodiscard]] inline TruncationReport truncation_compare(const TestFunction& f, const EigenBasis& basis, const EquilibriumData& eq, const std::vector<int>& dgrid,
                                                         const RunConfig& rc) {
    for (int d : dgrid)
        if (d < 1 || d > basis.d) throw ExperimentError("truncation_compare: d out of range for the basis");
    const auto st = standardization(f, eq, rc.beta);
    const auto means = mode_means(basis, eq);
    const auto e = phi_expand(f, basis, eq, means);
    std::vector<double> mu_phi(basis.d);
    for (int n = 1; n <= basis.d; ++n) mu_phi[n - 1] = mu_integral(phi_polynomial(basis, n), eq, std::max(512, basis.K + 64));

    TruncationReport rep;
    rep.function = f.name;
    std::vector<std::vector<double>> gaps(dgrid.size());
    std::vector<TestFunction> g;
    std::vector<double> mu_g;
    for (int d : dgrid) {
        g.push_back(truncated_function(e, basis, d));
        double m = 0.0;
        for (int n = 0; n < d; ++n) m += e.coeffs[n] * mu_phi[n];
        mu_g.push_back(m);
    }
    (void)draw_configurations(eq, rc, [&](const std::vector<double>& l) {
        const double xf = LinearStatistic(f, st.mu_f)(l);
        for (std::size_t k = 0; k < dgrid.size(); ++k) {
            const double gap = st.scale() * (xf - LinearStatistic(g[k], mu_g[k])(l));
            gaps[k].push_back(gap * gap);
        }
    });
    const auto grid = interior_grid(401);
    for (std::size_t k = 0; k < dgrid.size(); ++k) {
        TruncationRow row;
        row.d = dgrid[k];
        row.gap_second_moment = mean_of(gaps[k]);
        row.gap_se = batch_means_se(gaps[k]);
        for (double x : grid) row.sup_error = std::max(row.sup_error, std::abs(f(x) - e.f0 - g[k](x)));
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace betaclt
