#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "betaclt/equilibrium.hpp"
#include "betaclt/potential.hpp"
#include "betaclt/rng.hpp"
#include "betaclt/stats.hpp"

namespace betaclt {

class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Preconditioner { Hessian, Identity };

struct SamplerConfig {
    int N = 1;
    double beta = 2.0;
    int M = 1;               ///< number of emitted configurations
    int burn_in = -1;        ///< MCMC steps before emission; -1 means 10·N
    std::optional<double> step;  ///< MALA step; unset means automatic
    bool adapt = true;       ///< tune the step toward 55% acceptance during burn-in
    std::uint64_t seed = 0;
    int thin = 0;            ///< steps between emissions; 0 picks it from a pilot autocorrelation estimate
    int chains = 1;
    Preconditioner precond = Preconditioner::Hessian;
};

/// A set of configurations with the metadata needed to check that downstream consumers match.
struct SampleSet {
    int N = 0;
    double beta = 0.0;
    std::string potential;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> samples;
};

using ConfigurationSink = std::function<void(const std::vector<double>&)>;

/// Σ_{i<j} log 1/|λ_i-λ_j| + N Σ V(λ_j); +∞ on coincident points.
[[nodiscard]] inline double hamiltonian(const std::vector<double>& lambda, const Potential& V) {
    const std::size_t n = lambda.size();
    const double N = static_cast<double>(n);
    double conf = 0.0;
    for (double x : lambda) conf += V(x);
    // Products of up to 16 gaps between logs; gaps lie well inside the double range.
    double logs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        int cnt = 0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::abs(lambda[i] - lambda[j]);
            if (d == 0.0) return std::numeric_limits<double>::infinity();
            prod *= d;
            if (++cnt == 16) {
                logs += std::log(prod);
                prod = 1.0;
                cnt = 0;
            }
        }
        if (cnt) logs += std::log(prod);
    }
    return -logs + N * conf;
}

/// ∇ log density: component j is -βN V'(λ_j) + β Σ_{i≠j} 1/(λ_j - λ_i).
[[nodiscard]] inline std::vector<double> grad_log_density(const std::vector<double>& lambda, const Potential& V, double beta) {
    const std::size_t n = lambda.size();
    const double N = static_cast<double>(n);
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double w = 1.0 / (lambda[i] - lambda[j]);
            g[i] += w;
            g[j] -= w;
        }
    for (std::size_t j = 0; j < n; ++j) g[j] = beta * (g[j] - N * V.d1(lambda[j]));
    return g;
}

namespace detail {

/// log density -βH and its gradient in one pass over pairs. Gaps are multiplied in 8 independent
/// lanes and logged every 16 factors, so the loop vectorizes and needs few logarithms.
inline double log_density_and_grad(const Eigen::VectorXd& x, const Potential& V, double beta, Eigen::VectorXd& g) {
    constexpr int L = 8;
    const Eigen::Index n = x.size();
    const double N = static_cast<double>(n);
    g.setZero(n);
    const double* xp = x.data();
    double* gp = g.data();
    double logs = 0.0, conf = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        using Lane = Eigen::Array<double, L, 1>;
        const double xi = xp[i];
        Lane gl = Lane::Zero(), pl = Lane::Ones();
        int depth = 0;
        Eigen::Index j = i + 1;
        for (; j + L <= n; j += L) {
            const Lane d = xi - Eigen::Map<const Lane>(xp + j);
            const Lane w = d.inverse();
            gl += w;
            Eigen::Map<Lane>(gp + j) -= w;
            pl *= d.abs();
            if (++depth == 16) {
                if ((pl == 0.0).any()) return -std::numeric_limits<double>::infinity();
                for (int l = 0; l < L; ++l) logs += std::log(pl[l]);
                pl.setOnes();
                depth = 0;
            }
        }
        for (; j < n; ++j) {
            const double d = xi - xp[j];
            const double w = 1.0 / d;
            gl[0] += w;
            gp[j] -= w;
            pl[0] *= std::abs(d);
        }
        for (int l = 0; l < L; ++l) {
            if (pl[l] == 0.0) return -std::numeric_limits<double>::infinity();
            logs += std::log(pl[l]);
            gp[i] += gl[l];
        }
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        conf += V(xp[k]);
        gp[k] = beta * (gp[k] - N * V.d1(xp[k]));
    }
    const double lp = -beta * (-logs + N * conf);
    return std::isfinite(lp) ? lp : -std::numeric_limits<double>::infinity();
}

/// β times the Hessian of the Hamiltonian.
inline Eigen::MatrixXd hamiltonian_precision(const Eigen::VectorXd& x, const Potential& V, double beta) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        P(i, i) = static_cast<double>(n) * V.d2(x[i]);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double w = 1.0 / ((x[i] - x[j]) * (x[i] - x[j]));
            P(i, i) += w;
            P(i, j) = -w;
        }
    }
    return beta * P;
}

}  // namespace detail

/// Metropolis–Hastings acceptance probability from log target and log proposal densities.
[[nodiscard]] inline double mh_accept_prob(double log_pi_x, double log_pi_y, double log_q_y_given_x, double log_q_x_given_y) {
    if (!std::isfinite(log_pi_y)) return 0.0;
    const double r = log_pi_y - log_pi_x + log_q_x_given_y - log_q_y_given_x;
    return r >= 0.0 ? 1.0 : std::exp(r);
}

/// Scaled tridiagonal model: diagonal and off-diagonal already divided by 2√(βN).
struct TridiagonalDraw {
    Eigen::VectorXd diag;
    Eigen::VectorXd off;
};

[[nodiscard]] inline TridiagonalDraw draw_tridiagonal(int N, double beta, Engine& rng) {
    TridiagonalDraw t;
    t.diag.resize(N);
    t.off.resize(std::max(N - 1, 0));
    const double s = 1.0 / (2.0 * std::sqrt(beta * N));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0));
    for (int i = 0; i < N; ++i) t.diag[i] = s * normal(rng);
    for (int i = 1; i < N; ++i) {
        std::chi_squared_distribution<double> chi2(beta * (N - i));
        t.off[i - 1] = s * std::sqrt(chi2(rng));
    }
    return t;
}

/// tr(T^k) for k = 0..kmax by banded powers, O(N·kmax²).
[[nodiscard]] inline std::vector<double> tridiagonal_power_sums(const TridiagonalDraw& t, int kmax) {
    const int N = static_cast<int>(t.diag.size());
    std::vector<double> p(kmax + 1, 0.0);
    p[0] = N;
    if (kmax == 0) return p;
    const int w = kmax;  // band half-width of T^kmax
    const int stride = 2 * w + 1;
    // band[i*stride + (j-i+w)] = (T^k)_{ij}
    std::vector<double> cur(static_cast<std::size_t>(N) * stride, 0.0), nxt(cur.size());
    for (int i = 0; i < N; ++i) cur[i * stride + w] = 1.0;
    auto T = [&](int i, int j) -> double {
        if (i == j) return t.diag[i];
        if (j == i + 1) return t.off[i];
        if (i == j + 1) return t.off[j];
        return 0.0;
    };
    for (int k = 1; k <= kmax; ++k) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (int i = 0; i < N; ++i)
            for (int o = -std::min(k, w); o <= std::min(k, w); ++o) {
                const int j = i + o;
                if (j < 0 || j >= N) continue;
                double acc = 0.0;
                for (int l = j - 1; l <= j + 1; ++l) {
                    if (l < 0 || l >= N || std::abs(l - i) > k - 1) continue;
                    acc += cur[i * stride + (l - i + w)] * T(l, j);
                }
                nxt[i * stride + o + w] = acc;
            }
        std::swap(cur, nxt);
        double tr = 0.0;
        for (int i = 0; i < N; ++i) tr += cur[i * stride + w];
        p[k] = tr;
    }
    return p;
}

[[nodiscard]] inline std::vector<double> tridiagonal_eigenvalues(const TridiagonalDraw& t) {
    const int N = static_cast<int>(t.diag.size());
    if (N == 1) return {t.diag[0]};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(t.diag, t.off, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SamplerError("tridiagonal eigensolver did not converge");
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + N);
    std::sort(ev.begin(), ev.end());
    return ev;
}

namespace detail {
inline void check_gaussian_config(const SamplerConfig& cfg) {
    if (!(cfg.beta > 0.0)) throw std::invalid_argument("sampler: beta must be positive");
    if (cfg.N < 1) throw std::invalid_argument("sampler: N must be positive");
    if (cfg.M < 1) throw std::invalid_argument("sampler: M must be positive");
}
}  // namespace detail

/// Exact sampling for V = x²: eigenvalues of the scaled tridiagonal β-model, emitted sorted.
inline void sample_gaussian_beta(const SamplerConfig& cfg, const ConfigurationSink& emit) {
    detail::check_gaussian_config(cfg);
    auto rng = make_engine(cfg.seed);
    for (int m = 0; m < cfg.M; ++m) emit(tridiagonal_eigenvalues(draw_tridiagonal(cfg.N, cfg.beta, rng)));
}

/// Same stream of matrices as sample_gaussian_beta, reduced to power sums p_0..p_kmax without diagonalizing.
inline void sample_gaussian_beta_power_sums(const SamplerConfig& cfg, int kmax, const ConfigurationSink& emit) {
    detail::check_gaussian_config(cfg);
    auto rng = make_engine(cfg.seed);
    for (int m = 0; m < cfg.M; ++m) emit(tridiagonal_power_sums(draw_tridiagonal(cfg.N, cfg.beta, rng), kmax));
}

struct MCMCStats {
    double acceptance = 0.0;        ///< over emission steps, averaged across chains
    double burn_in_acceptance = 0.0;  ///< last adaptation window
    double step = 0.0;              ///< final step of the last chain
    int thin = 0;
    double pilot_tau = 0.0;         ///< integrated autocorrelation time in steps, from the pilot run
    long long steps = 0;
};

namespace detail {

/// Starting configuration: μ_V quantiles at levels (j - ½)/N.
inline Eigen::VectorXd quantile_start(const EquilibriumData& eq, int N) {
    const auto rho = classical_locations(eq, 2 * N);
    Eigen::VectorXd x(N);
    for (int j = 0; j < N; ++j) x[j] = rho[2 * j + 1];
    return x;
}

/// Preconditioned MALA, run as plain MALA in whitened coordinates z = U x, where P = UᵀU is the
/// Cholesky factorization of the precision. Two triangular solves per step.
class MalaChain {
public:
    MalaChain(const Potential& V, double beta, Eigen::VectorXd x0, Preconditioner pc, double h)
        : V_(V), beta_(beta), pc_(pc), h_(h), x_(std::move(x0)) {
        lp_ = log_density_and_grad(x_, V_, beta_, gx_);
        if (!std::isfinite(lp_)) throw SamplerError("MALA: starting configuration has zero density");
        if (pc_ == Preconditioner::Hessian) {
            Eigen::MatrixXd P = hamiltonian_precision(x_, V_, beta_);
            double shift = 0.0;
            for (int attempt = 0; attempt < 40; ++attempt) {
                llt_.compute(P + shift * Eigen::MatrixXd::Identity(P.rows(), P.cols()));
                if (llt_.info() == Eigen::Success) break;
                shift = shift == 0.0 ? 1e-8 * P.diagonal().cwiseAbs().maxCoeff() : 10.0 * shift;
            }
            if (llt_.info() != Eigen::Success) throw SamplerError("MALA: Hessian preconditioner is not positive definite");
        }
        z_ = to_white(x_);
        gz_ = grad_to_white(gx_);
    }

    [[nodiscard]] double step() const { return h_; }
    void set_step(double h) { h_ = h; }
    [[nodiscard]] const Eigen::VectorXd& state() const { return x_; }

    /// One MALA transition; returns whether the proposal was accepted.
    bool advance(Engine& rng) {
        if (h_ == 0.0) return true;
        const Eigen::Index n = x_.size();
        Eigen::VectorXd xi(n);
        for (Eigen::Index i = 0; i < n; ++i) xi[i] = normal_(rng);
        const Eigen::VectorXd zy = z_ + 0.5 * h_ * gz_ + std::sqrt(h_) * xi;
        const double u = uniform_(rng);
        const Eigen::VectorXd y = from_white(zy);
        // The target is restricted to the ordered chamber, so the labels always match the preconditioner.
        for (Eigen::Index i = 1; i < n; ++i)
            if (!(y[i] > y[i - 1])) return false;
        Eigen::VectorXd gy;
        const double lpy = log_density_and_grad(y, V_, beta_, gy);
        if (!std::isfinite(lpy)) return false;
        const Eigen::VectorXd gzy = grad_to_white(gy);
        const double lq_fwd = -0.5 * xi.squaredNorm();
        const double lq_bwd = -(z_ - zy - 0.5 * h_ * gzy).squaredNorm() / (2.0 * h_);
        if (u >= mh_accept_prob(lp_, lpy, lq_fwd, lq_bwd)) return false;
        x_ = y;
        z_ = zy;
        lp_ = lpy;
        gx_ = std::move(gy);
        gz_ = gzy;
        return true;
    }

private:
    Eigen::VectorXd to_white(const Eigen::VectorXd& x) const { return pc_ == Preconditioner::Hessian ? Eigen::VectorXd(llt_.matrixU() * x) : x; }
    Eigen::VectorXd from_white(const Eigen::VectorXd& z) const { return pc_ == Preconditioner::Hessian ? Eigen::VectorXd(llt_.matrixU().solve(z)) : z; }
    Eigen::VectorXd grad_to_white(const Eigen::VectorXd& g) const { return pc_ == Preconditioner::Hessian ? Eigen::VectorXd(llt_.matrixL().solve(g)) : g; }

    const Potential& V_;
    double beta_;
    Preconditioner pc_;
    double h_;
    Eigen::VectorXd x_, z_, gx_, gz_;
    double lp_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline std::vector<double> to_vector(const Eigen::VectorXd& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace detail

/// Default MALA step: 0.1·N^{-5/3} without preconditioning, N^{-1/3} with the Hessian preconditioner.
[[nodiscard]] inline double default_mala_step(int N, Preconditioner pc) {
    return pc == Preconditioner::Identity ? 0.1 * std::pow(static_cast<double>(N), -5.0 / 3.0) : std::pow(static_cast<double>(N), -1.0 / 3.0);
}

/// Metropolis-adjusted Langevin sampling of exp(-βH) for the potential of `eq`, on the ordered chamber
/// λ_1 < … < λ_N (the density is symmetric, so this is the same law of the sorted configuration).
inline MCMCStats sample_mcmc(const EquilibriumData& eq, const SamplerConfig& cfg, const ConfigurationSink& emit) {
    detail::check_gaussian_config(cfg);
    if (cfg.chains < 1) throw std::invalid_argument("sample_mcmc: chains must be positive");
    if (cfg.step && !(*cfg.step >= 0.0)) throw std::invalid_argument("sample_mcmc: step must be nonnegative");
    const int N = cfg.N;
    const int burn = cfg.burn_in < 0 ? 10 * N : cfg.burn_in;
    const Eigen::VectorXd x0 = detail::quantile_start(eq, N);
    MCMCStats st;
    double acc_total = 0.0;
    long long emit_steps = 0;
    for (int c = 0; c < cfg.chains; ++c) {
        auto rng = make_engine(cfg.seed, static_cast<std::uint64_t>(c));
        const double h0 = cfg.step ? *cfg.step : default_mala_step(N, cfg.precond);
        detail::MalaChain chain(eq.V, cfg.beta, x0, cfg.precond, h0);
        const bool adapt = cfg.adapt && h0 > 0.0;
        const int window = 50;
        int win_acc = 0, win_n = 0;
        double last_rate = 1.0;
        for (int s = 0; s < burn; ++s) {
            win_acc += chain.advance(rng);
            ++win_n;
            if (win_n == window) {
                last_rate = static_cast<double>(win_acc) / window;
                if (adapt) chain.set_step(chain.step() * std::exp(2.0 * (last_rate - 0.55)));
                win_acc = win_n = 0;
            }
        }
        st.steps += burn;
        if (burn >= window) {
            st.burn_in_acceptance = last_rate;
            if (last_rate < 0.05)
                throw SamplerError("MALA: acceptance " + std::to_string(last_rate) + " below 5% after adaptation (N = " + std::to_string(N) + ")");
        }
        int thin = cfg.thin;
        if (thin <= 0) {
            // Pilot run on the slowest low-order power sums.
            const int pilot = std::max(2000, 20 * N);
            std::vector<double> p1(pilot), p2(pilot);
            for (int s = 0; s < pilot; ++s) {
                (void)chain.advance(rng);
                const auto& x = chain.state();
                p1[s] = x.sum();
                p2[s] = x.squaredNorm();
            }
            st.steps += pilot;
            st.pilot_tau = std::max(integrated_autocorr_time(p1), integrated_autocorr_time(p2));
            thin = static_cast<int>(std::ceil(st.pilot_tau));
        }
        st.thin = thin;
        const int Mc = cfg.M / cfg.chains + (c < cfg.M % cfg.chains ? 1 : 0);
        int accepted = 0;
        for (int m = 0; m < Mc; ++m) {
            for (int s = 0; s < thin; ++s) accepted += chain.advance(rng);
            emit(detail::to_vector(chain.state()));
        }
        const long long n_steps = static_cast<long long>(Mc) * thin;
        st.steps += n_steps;
        emit_steps += n_steps;
        acc_total += accepted;
        st.step = chain.step();
    }
    st.acceptance = emit_steps ? acc_total / static_cast<double>(emit_steps) : 1.0;
    return st;
}

/// Collects a stream into a SampleSet.
[[nodiscard]] inline SampleSet collect_gaussian_beta(const SamplerConfig& cfg) {
    SampleSet s{cfg.N, cfg.beta, "gaussian", cfg.seed, {}};
    s.samples.reserve(cfg.M);
    sample_gaussian_beta(cfg, [&](const std::vector<double>& l) { s.samples.push_back(l); });
    return s;
}

[[nodiscard]] inline SampleSet collect_mcmc(const EquilibriumData& eq, const SamplerConfig& cfg, MCMCStats* stats = nullptr) {
    SampleSet s{cfg.N, cfg.beta, eq.V.name, cfg.seed, {}};
    s.samples.reserve(cfg.M);
    auto st = sample_mcmc(eq, cfg, [&](const std::vector<double>& l) { s.samples.push_back(l); });
    if (stats) *stats = st;
    return s;
}

/// Centered linear statistic Σ f(λ_j) - N∫f dμ_V, with ∫f dμ_V computed once.
class LinearStatistic {
public:
    LinearStatistic(TestFunction f, const EquilibriumData& eq) : f_(std::move(f)), mu_f_(mu_integral(f_, eq)) {}
    LinearStatistic(TestFunction f, double mu_f) : f_(std::move(f)), mu_f_(mu_f) {}

    [[nodiscard]] double operator()(const std::vector<double>& lambda) const {
        CompensatedSum s;
        for (double x : lambda) s.add(f_(x));
        return s.value() - static_cast<double>(lambda.size()) * mu_f_;
    }
    /// Same value from power sums p_0..p_k of a configuration (polynomial f only).
    [[nodiscard]] double from_power_sums(const std::vector<double>& p) const {
        if (!f_.is_polynomial()) throw std::logic_error("LinearStatistic: power-sum path needs a polynomial");
        if (p.size() < f_.monomials.size()) throw std::invalid_argument("LinearStatistic: not enough power sums");
        double s = 0.0;
        for (std::size_t m = 0; m < f_.monomials.size(); ++m) s += f_.monomials[m] * p[m];
        return s - p[0] * mu_f_;
    }
    [[nodiscard]] double mu_f() const { return mu_f_; }
    [[nodiscard]] const TestFunction& function() const { return f_; }

private:
    TestFunction f_;
    double mu_f_;
};

[[nodiscard]] inline double linear_statistic(const TestFunction& f, const std::vector<double>& lambda, const EquilibriumData& eq) {
    return LinearStatistic(f, eq)(lambda);
}

struct RigidityCheck {
    double eps = 0.0;
    std::vector<bool> in_event;   ///< per sample: configuration lies in B_ε
    double violation_fraction = 0.0;
    int worst_index = 0;          ///< 1-based j of the largest scaled deviation
    double worst_deviation = 0.0; ///< max_j |λ_j - ρ_j| ĵ^{1/3} N^{2/3-ε}
};

/// Largest scaled deviation max_j |λ_j - ρ_j| ĵ^{1/3} N^{2/3-ε}, with ĵ = min(j, N-j+1); also returns argmax j.
[[nodiscard]] inline std::pair<double, int> rigidity_deviation(const std::vector<double>& lambda, const std::vector<double>& rho, double eps) {
    const int N = static_cast<int>(lambda.size());
    if (rho.size() != lambda.size() + 1) throw std::invalid_argument("rigidity: need rho_0..rho_N");
    const double scale = std::pow(static_cast<double>(N), 2.0 / 3.0 - eps);
    double worst = 0.0;
    int at = 1;
    for (int j = 1; j <= N; ++j) {
        const double jh = std::min(j, N - j + 1);
        const double dev = std::abs(lambda[j - 1] - rho[j]) * std::cbrt(jh) * scale;
        if (dev > worst) {
            worst = dev;
            at = j;
        }
    }
    return {worst, at};
}

[[nodiscard]] inline RigidityCheck rigidity_fraction(const std::vector<std::vector<double>>& samples, const std::vector<double>& rho, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("rigidity_fraction: eps must be positive");
    RigidityCheck r;
    r.eps = eps;
    int bad = 0;
    for (const auto& l : samples) {
        auto [dev, j] = rigidity_deviation(l, rho, eps);
        r.in_event.push_back(dev <= 1.0);
        bad += dev > 1.0;
        if (dev > r.worst_deviation) {
            r.worst_deviation = dev;
            r.worst_index = j;
        }
    }
    r.violation_fraction = samples.empty() ? 0.0 : static_cast<double>(bad) / samples.size();
    return r;
}

[[nodiscard]] inline RigidityCheck rigidity_fraction(const std::vector<std::vector<double>>& samples, const EquilibriumData& eq, double eps) {
    if (samples.empty()) return rigidity_fraction(samples, std::vector<double>{}, eps);
    return rigidity_fraction(samples, classical_locations(eq, static_cast<int>(samples.front().size())), eps);
}

/// CSV dump: comment header with N, β, potential and seed, then one row per sample.
inline void write_samples_csv(std::ostream& os, const SampleSet& s) {
    os << "# N=" << s.N << " beta=" << s.beta << " potential=" << s.potential << " seed=" << s.seed << '\n';
    for (int j = 1; j <= s.N; ++j) os << (j > 1 ? "," : "") << "lambda_" << j;
    os << '\n';
    os.precision(17);
    for (const auto& l : s.samples) {
        for (std::size_t j = 0; j < l.size(); ++j) os << (j ? "," : "") << l[j];
        os << '\n';
    }
}

}  // namespace betaclt
