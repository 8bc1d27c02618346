#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "betaclt/eigenbasis.hpp"
#include "betaclt/equilibrium.hpp"
#include "betaclt/experiments.hpp"
#include "betaclt/registry.hpp"
#include "betaclt/sampler.hpp"
#include "betaclt/stein.hpp"

namespace betaclt::cli {

inline constexpr const char* schema_version = "betaclt-report/1";

/// Invalid command line or config file; the message names the offending key or token.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& what) : std::invalid_argument(what), key_(std::move(key)) {}
    [[nodiscard]] const std::string& key() const { return key_; }

private:
    std::string key_;
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"equilibrium", "eigenbasis", "sample", "clt", "stein", "rate", "joint", "truncate"};
    return s;
}

/// Every accepted key with its default; an empty default means unset.
inline const std::map<std::string, std::string>& config_defaults() {
    static const std::map<std::string, std::string> d{
        {"potential", ""},   {"beta", "2"},       {"n", "64"},          {"n_grid", "64,128,256,512"},
        {"samples", "1000"}, {"seed", "0"},       {"function", "x2"},   {"modes", ""},
        {"truncation", "0"}, {"d_grid", "4,8,16"}, {"sampler", "auto"}, {"thin", "0"},
        {"burn_in", "-1"},   {"step", ""},        {"chains", "1"},      {"eta", "3.5555555555555554"},
        {"delta", "0.25"},   {"output", ""},      {"format", "both"},   {"precond", "hessian"},
    };
    return d;
}

struct CliConfig {
    std::string subcommand;
    std::map<std::string, std::string> values;  ///< effective key → value, after file and flag merging

    [[nodiscard]] const std::string& raw(const std::string& key) const { return values.at(key); }
};

namespace detail {

inline std::string trim(const std::string& s) { return betaclt::detail::trim(s); }

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key, "malformed value for '" + key + "': '" + v + "' is not a number");
    }
    if (used != v.size() || !std::isfinite(x)) throw ConfigError(key, "malformed value for '" + key + "': '" + v + "' is not a number");
    return x;
}

inline long long to_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key, "malformed value for '" + key + "': '" + v + "' is not an integer");
    }
    if (used != v.size()) throw ConfigError(key, "malformed value for '" + key + "': '" + v + "' is not an integer");
    return x;
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto x = to_int(key, trim(tok));
        if (x < 1) throw ConfigError(key, "'" + key + "' entries must be positive, got " + tok);
        out.push_back(static_cast<int>(x));
    }
    if (out.empty()) throw ConfigError(key, "'" + key + "' must list at least one value");
    return out;
}

}  // namespace detail

/// Reads `key = value` lines; `#` starts a comment. Unknown keys are fatal.
[[nodiscard]] inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config", path + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
        if (!config_defaults().count(key)) throw ConfigError(key, path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (value.empty()) throw ConfigError(key, path + ":" + std::to_string(lineno) + ": empty value for '" + key + "'");
        out[key] = value;
    }
    return out;
}

/// Typed, validated view of a CliConfig.
struct Settings {
    std::string subcommand;
    std::string potential;
    double beta = 2.0;
    int n = 64;
    std::vector<int> n_grid;
    int samples = 1000;
    std::uint64_t seed = 0;
    std::string function;
    std::optional<int> modes;
    int truncation = 0;
    std::vector<int> d_grid;
    SamplerKind sampler = SamplerKind::Auto;
    int thin = 0;
    int burn_in = -1;
    std::optional<double> step;
    int chains = 1;
    double eta = 32.0 / 9.0;
    double delta = 0.25;
    std::string output;
    std::string format = "both";
    Preconditioner precond = Preconditioner::Hessian;
};

[[nodiscard]] inline Settings validate(const CliConfig& c) {
    Settings s;
    s.subcommand = c.subcommand;
    auto get = [&](const char* k) -> const std::string& { return c.raw(k); };
    s.potential = get("potential");
    if (s.potential.empty()) throw ConfigError("potential", "missing required field 'potential'");
    s.beta = detail::to_double("beta", get("beta"));
    if (!(s.beta > 0)) throw ConfigError("beta", "'beta' must be positive, got " + get("beta"));
    auto positive_int = [&](const char* k, long long lo) {
        const auto v = detail::to_int(k, get(k));
        if (v < lo || v > 100000000) throw ConfigError(k, std::string("'") + k + "' must be at least " + std::to_string(lo) + ", got " + get(k));
        return static_cast<int>(v);
    };
    s.n = positive_int("n", 1);
    s.n_grid = detail::to_int_list("n_grid", get("n_grid"));
    s.samples = positive_int("samples", 1);
    const auto seed = get("seed");
    if (seed.empty() || seed.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("seed", "malformed value for 'seed': '" + seed + "' is not a nonnegative integer");
    try {
        s.seed = std::stoull(seed);
    } catch (const std::exception&) {
        throw ConfigError("seed", "malformed value for 'seed': '" + seed + "' is out of range");
    }
    s.function = get("function");
    if (!get("modes").empty()) s.modes = positive_int("modes", 1);
    s.truncation = positive_int("truncation", 0);
    s.d_grid = detail::to_int_list("d_grid", get("d_grid"));
    const auto& smp = get("sampler");
    if (smp == "auto") s.sampler = SamplerKind::Auto;
    else if (smp == "tridiagonal") s.sampler = SamplerKind::Tridiagonal;
    else if (smp == "mcmc") s.sampler = SamplerKind::MCMC;
    else throw ConfigError("sampler", "'sampler' must be auto, tridiagonal or mcmc, got '" + smp + "'");
    s.thin = positive_int("thin", 0);
    const auto burn = detail::to_int("burn_in", get("burn_in"));
    if (burn < -1) throw ConfigError("burn_in", "'burn_in' must be -1 (automatic) or nonnegative, got " + get("burn_in"));
    s.burn_in = static_cast<int>(burn);
    if (!get("step").empty()) {
        s.step = detail::to_double("step", get("step"));
        if (!(*s.step > 0)) throw ConfigError("step", "'step' must be positive, got " + get("step"));
    }
    s.chains = positive_int("chains", 1);
    s.eta = detail::to_double("eta", get("eta"));
    if (!(s.eta > 0)) throw ConfigError("eta", "'eta' must be positive, got " + get("eta"));
    s.delta = detail::to_double("delta", get("delta"));
    if (!(s.delta > 0 && s.delta <= 1)) throw ConfigError("delta", "'delta' must lie in (0, 1], got " + get("delta"));
    s.output = get("output");
    s.format = get("format");
    if (s.format != "json" && s.format != "csv" && s.format != "both") throw ConfigError("format", "'format' must be json, csv or both, got '" + s.format + "'");
    const auto& pc = get("precond");
    if (pc == "hessian") s.precond = Preconditioner::Hessian;
    else if (pc == "identity") s.precond = Preconditioner::Identity;
    else throw ConfigError("precond", "'precond' must be hessian or identity, got '" + pc + "'");
    return s;
}

/// Parses `betaclt <subcommand> [--key value ...] [--config file]`; flags override file values.
[[nodiscard]] inline CliConfig parse_config(const std::vector<std::string>& args) {
    CLI::App app{"betaclt"};
    app.require_subcommand(1, 1);
    app.set_help_flag();
    std::string config_path;
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> opts;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->set_help_flag();
        sub->add_option("--config", config_path);
        for (const auto& [key, def] : config_defaults()) {
            std::string flag = "--" + key;
            for (auto& ch : flag)
                if (ch == '_') ch = '-';
            auto* o = sub->add_option(flag + (key.find('_') != std::string::npos ? ",--" + key : std::string{}), flags[name + "/" + key]);
            o->allow_extra_args(false);
            opts[name + "/" + key] = o;
        }
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        std::string token = e.what();
        throw ConfigError("argv", "command line: " + token);
    }
    CliConfig c;
    for (const auto* sub : app.get_subcommands()) c.subcommand = sub->get_name();
    c.values = config_defaults();
    if (!config_path.empty())
        for (const auto& [k, v] : read_config_file(config_path)) c.values[k] = v;
    for (const auto& [key, def] : config_defaults()) {
        const auto id = c.subcommand + "/" + key;
        if (opts.at(id)->count() > 0) c.values[key] = flags.at(id);
    }
    return c;
}

[[nodiscard]] inline std::string usage() {
    std::ostringstream os;
    os << "usage: betaclt <subcommand> [--key value ...] [--config file]\n\nsubcommands:";
    for (const auto& c : subcommands()) os << ' ' << c;
    os << "\n\nkeys (flag --key, or 'key = value' in the config file; flags win):\n";
    for (const auto& [k, v] : config_defaults()) os << "  " << k << (v.empty() ? "" : " (default " + v + ")") << '\n';
    os << "\nOutput goes to --output, else $BETACLT_OUTPUT_DIR, else the current directory.\n";
    return os.str();
}

/// FNV-1a over the canonical `key=value;` listing of the effective config.
[[nodiscard]] inline std::string run_id(const CliConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    mix(c.subcommand + ";");
    for (const auto& [k, v] : c.values)
        if (k != "output" && k != "format") mix(k + "=" + v + ";");
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

using nlohmann::json;

namespace detail {

inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

inline json matrix(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
        a.push_back(row);
    }
    return a;
}

inline json w2(const W2Estimate& w) { return {{"estimate", number(w.estimate)}, {"error", number(w.error)}}; }

inline json mcmc(const std::optional<MCMCStats>& s) {
    if (!s) return nullptr;
    return {{"acceptance", number(s->acceptance)}, {"burn_in_acceptance", number(s->burn_in_acceptance)}, {"step", number(s->step)},
            {"thin", s->thin},
            {"pilot_tau", number(s->pilot_tau)},
            {"steps", s->steps}};
}

}  // namespace detail

[[nodiscard]] inline json stein_json(const SteinEstimate& e) {
    json per = json::array();
    for (int n = 0; n < e.d; ++n)
        per.push_back({{"mode", n + 1}, {"A2", detail::number(e.A2_per_mode[n])}, {"B2", detail::number(e.B2_per_mode[n])},
                       {"mean_residual", detail::number(e.mean_residual[n])}});
    json j{{"A", detail::number(e.A)},       {"A_se", detail::number(e.A_se)}, {"B", detail::number(e.B)}, {"B_se", detail::number(e.B_se)},
           {"bound", detail::number(e.bound)}, {"d", e.d},                     {"N", e.N},                 {"beta", e.beta},
           {"potential", e.potential},       {"M", e.M},                       {"per_mode", per}};
    if (e.d == 1) j["tv_bound"] = detail::number(e.tv_bound);
    return j;
}

[[nodiscard]] inline json clt_json(const CltReport& r) {
    json j{{"potential", r.potential},
           {"function", r.function},
           {"N", r.N},
           {"beta", r.beta},
           {"M", r.M},
           {"seed", r.seed},
           {"sampler", r.sampler},
           {"Sigma", detail::number(r.standard.sigma)},
           {"m", detail::number(r.standard.mean)},
           {"linstat", {{"mean", detail::number(r.linstat_mean)}, {"mean_se", detail::number(r.linstat_mean_se)},
                        {"variance", detail::number(r.linstat_var)}, {"variance_se", detail::number(r.linstat_var_se)},
                        {"target_mean", detail::number(r.target_mean())}, {"target_variance", detail::number(r.target_variance())}}},
           {"X", {{"mean", detail::number(r.moments.mean)}, {"variance", detail::number(r.moments.variance)},
                  {"skewness", detail::number(r.moments.skewness)}, {"excess_kurtosis", detail::number(r.moments.excess_kurtosis)},
                  {"target_mean", 0.0}, {"target_variance", 1.0}}},
           {"w2", detail::w2(r.w2)},
           {"mcmc", detail::mcmc(r.mcmc)}};
    j["stein"] = r.stein ? stein_json(*r.stein) : json(nullptr);
    return j;
}

/// One row of the sweep CSV: N, M, w2, w2_err, mean, var, stein_A, stein_B, bound.
inline void write_sweep_row(std::ostream& os, const CltReport& r) {
    os << std::setprecision(17) << r.N << ',' << r.M << ',' << r.w2.estimate << ',' << r.w2.error << ',' << r.linstat_mean << ',' << r.linstat_var;
    if (r.stein) os << ',' << r.stein->A << ',' << r.stein->B << ',' << r.stein->bound << '\n';
    else os << ",,,\n";
}

inline constexpr const char* sweep_header = "N,M,w2,w2_err,mean,var,stein_A,stein_B,bound\n";

/// Artifacts produced by one run, keyed by file extension.
struct Artifacts {
    json report;
    std::map<std::string, std::string> csv;  ///< suffix → content
};

namespace detail {

inline RunConfig run_config(const Settings& s) {
    RunConfig rc;
    rc.N = s.n;
    rc.beta = s.beta;
    rc.M = s.samples;
    rc.seed = s.seed;
    rc.sampler = s.sampler;
    rc.mcmc.thin = s.thin;
    rc.mcmc.burn_in = s.burn_in;
    rc.mcmc.step = s.step;
    rc.mcmc.chains = s.chains;
    rc.mcmc.precond = s.precond;
    return rc;
}

inline EigenbasisOptions basis_options(const Settings& s) {
    EigenbasisOptions o;
    o.eta = s.eta;
    o.delta = s.delta;
    return o;
}

/// Chebyshev modes for V = x², eigenbasis modes otherwise.
inline std::vector<ModeSpec> modes_for(const EquilibriumData& eq, const Settings& s, int d, std::optional<EigenBasis>& keep) {
    if (is_gaussian_potential(eq.V)) {
        std::vector<int> ks(d);
        for (int k = 0; k < d; ++k) ks[k] = k + 1;
        return chebyshev_modes(eq, ks);
    }
    const int dd = std::max(d, 4);
    keep.emplace(build_eigenbasis(eq, dd, s.truncation > 0 ? s.truncation : 16 * dd, basis_options(s)));
    return eigenbasis_modes(*keep, eq, d);
}

}  // namespace detail

[[nodiscard]] inline Artifacts execute(const Settings& s) {
    Artifacts a;
    const auto eq = verify_one_cut(make_potential(s.potential));
    const auto rc = detail::run_config(s);
    json& r = a.report["results"];
    const auto& cmd = s.subcommand;
    if (cmd == "equilibrium") {
        std::ostringstream csv;
        csv << "x,S,Q\n" << std::setprecision(17);
        const double lo = -1.0 - eq.delta, hi = 1.0 + eq.delta;
        for (int i = 0; i <= 400; ++i) {
            const double x = lo + (hi - lo) * i / 400.0;
            csv << x << ',' << eq.S(x) << ',' << eq.Q(x) << '\n';
        }
        a.csv["csv"] = csv.str();
        r = {{"min_S", detail::number(eq.min_S)},
             {"ell_V", detail::number(eq.ell_V)},
             {"mass_residual", detail::number(eq.mass_residual)},
             {"variational_residual", detail::number(eq.variational_residual)},
             {"q_residual", detail::number(eq.q_residual)},
             {"min_outside_gap", detail::number(eq.min_outside_gap)},
             {"shift", eq.V.shift},
             {"scale", eq.V.scale},
             {"S_T", detail::numbers(eq.S_T.coeffs)}};
    } else if (cmd == "eigenbasis") {
        const int d = s.modes.value_or(8);
        const auto b = build_eigenbasis(eq, d, s.truncation, detail::basis_options(s));
        std::ostringstream csv;
        write_basis_csv(csv, b);
        a.csv["csv"] = csv.str();
        r = {{"K", b.K},
             {"d", b.d},
             {"sigma", detail::numbers(b.sigma)},
             {"eps", detail::numbers(b.eps)},
             {"eta", b.eta},
             {"delta", b.delta},
             {"kappa", b.kappa},
             {"orthonormality_residual", detail::number(orthonormality_residual(b))},
             {"variance_identity_residual", detail::number(variance_identity_residual(b, std::min(b.d, 16)))},
             {"generalized_residual", detail::number(generalized_residual(b))}};
    } else if (cmd == "sample") {
        SampleSet set;
        set.N = s.n;
        set.beta = s.beta;
        set.potential = eq.V.name;
        set.seed = s.seed;
        const auto st = draw_configurations(eq, rc, [&](const std::vector<double>& l) { set.samples.push_back(l); });
        std::ostringstream csv;
        write_samples_csv(csv, set);
        a.csv["csv"] = csv.str();
        r = {{"N", s.n}, {"beta", s.beta}, {"M", set.samples.size()}, {"potential", eq.V.name}, {"mcmc", detail::mcmc(st)}};
    } else if (cmd == "clt") {
        std::optional<EigenBasis> keep;
        std::vector<ModeSpec> modes;
        if (s.modes) modes = detail::modes_for(eq, s, *s.modes, keep);
        const auto rep = clt_experiment(eq, make_function(s.function), rc, modes);
        std::ostringstream csv;
        csv << sweep_header;
        write_sweep_row(csv, rep);
        a.csv["csv"] = csv.str();
        r = clt_json(rep);
    } else if (cmd == "stein") {
        std::optional<EigenBasis> keep;
        const auto modes = detail::modes_for(eq, s, s.modes.value_or(3), keep);
        SteinAccumulator acc(modes, s.n, s.beta);
        bool fast = betaclt::detail::use_tridiagonal(eq, rc);
        for (const auto& m : modes) fast = fast && m.phi.is_polynomial();
        std::optional<MCMCStats> st;
        if (fast)
            sample_gaussian_beta_power_sums(betaclt::detail::sampler_config(rc), power_sum_order(modes, eq.V),
                                            [&](const std::vector<double>& p) { acc.add(evaluate_modes_power_sums(modes, p, eq.V, s.beta)); });
        else
            st = draw_configurations(eq, rc, [&](const std::vector<double>& l) { acc.add(evaluate_modes(modes, l, eq.V, s.beta)); });
        auto e = acc.result();
        e.potential = eq.V.name;
        r = stein_json(e);
        r["mcmc"] = detail::mcmc(st);
    } else if (cmd == "rate") {
        const auto fit = rate_fit(eq, make_function(s.function), s.n_grid, rc);
        std::ostringstream csv;
        csv << sweep_header;
        json reports = json::array();
        for (const auto& rep : fit.reports) {
            write_sweep_row(csv, rep);
            reports.push_back(clt_json(rep));
        }
        a.csv["csv"] = csv.str();
        r = {{"N", fit.N},
             {"w2", detail::numbers(fit.w2)},
             {"w2_err", detail::numbers(fit.w2_err)},
             {"slope", detail::number(fit.slope)},
             {"slope_se", detail::number(fit.slope_se)},
             {"intercept", detail::number(fit.intercept)},
             {"theta_reference", fit.theta_reference},
             {"refused", fit.refused},
             {"refusal_reason", fit.refusal_reason},
             {"reports", reports}};
    } else if (cmd == "joint") {
        std::optional<EigenBasis> keep;
        const auto rep = joint_clt_check(eq, detail::modes_for(eq, s, s.modes.value_or(3), keep), rc);
        json coords = json::array(), projs = json::array();
        for (const auto& w : rep.coordinate_w2) coords.push_back(detail::w2(w));
        for (std::size_t k = 0; k < rep.projection_w2.size(); ++k) {
            std::vector<double> u(rep.directions[k].data(), rep.directions[k].data() + rep.d);
            projs.push_back({{"direction", detail::numbers(u)}, {"w2", detail::w2(rep.projection_w2[k])}});
        }
        r = {{"d", rep.d},
             {"covariance", detail::matrix(rep.covariance)},
             {"covariance_se", detail::matrix(rep.covariance_se)},
             {"coordinate_w2", coords},
             {"projection_w2", projs},
             {"stein", stein_json(rep.stein)}};
    } else if (cmd == "truncate") {
        int dmax = 0;
        for (int d : s.d_grid) dmax = std::max(dmax, d);
        const auto b = build_eigenbasis(eq, s.modes.value_or(dmax), s.truncation, detail::basis_options(s));
        const auto rep = truncation_compare(make_function(s.function), b, eq, s.d_grid, rc);
        std::ostringstream csv;
        csv << "d,gap_second_moment,gap_se,sup_error\n" << std::setprecision(17);
        json rows = json::array();
        for (const auto& row : rep.rows) {
            csv << row.d << ',' << row.gap_second_moment << ',' << row.gap_se << ',' << row.sup_error << '\n';
            rows.push_back({{"d", row.d}, {"gap_second_moment", detail::number(row.gap_second_moment)}, {"gap_se", detail::number(row.gap_se)},
                            {"sup_error", detail::number(row.sup_error)}});
        }
        a.csv["csv"] = csv.str();
        r = {{"function", rep.function}, {"rows", rows}};
    } else {
        throw ConfigError("subcommand", "unknown subcommand '" + cmd + "'");
    }
    return a;
}

[[nodiscard]] inline json error_json(const std::string& type, const std::string& message, const std::string& key = {}) {
    json e{{"schema", schema_version}, {"error", {{"type", type}, {"message", message}}}};
    if (!key.empty()) e["error"]["key"] = key;
    return e;
}

/// Full CLI: parse, run, write `<subcommand>-<run id>.{json,csv}`. Returns the process exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        out << usage();
        return args.empty() ? 2 : 0;
    }
    CliConfig cfg;
    Settings s;
    try {
        cfg = parse_config(args);
        s = validate(cfg);
    } catch (const ConfigError& e) {
        err << error_json("config", e.what(), e.key()).dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << error_json("config", e.what()).dump() << '\n';
        return 2;
    }
    std::string dir = s.output;
    if (dir.empty()) {
        const char* env = std::getenv("BETACLT_OUTPUT_DIR");
        dir = env && *env ? env : ".";
    }
    const std::string id = run_id(cfg), stem = s.subcommand + "-" + id;
    try {
        auto a = execute(s);
        a.report["schema"] = schema_version;
        a.report["run_id"] = id;
        a.report["subcommand"] = s.subcommand;
        a.report["config"] = cfg.values;
        std::filesystem::create_directories(dir);
        std::vector<std::string> written;
        if (s.format != "csv") {
            const auto path = (std::filesystem::path(dir) / (stem + ".json")).string();
            std::ofstream(path) << a.report.dump(2) << '\n';
            written.push_back(path);
        }
        if (s.format != "json")
            for (const auto& [suffix, text] : a.csv) {
                const auto path = (std::filesystem::path(dir) / (stem + "." + suffix)).string();
                // The CSV carries the schema and the effective config as leading comment lines.
                std::ofstream f(path);
                f << "# schema=" << schema_version << " run_id=" << id << " subcommand=" << s.subcommand << '\n' << "# config";
                for (const auto& [k, v] : cfg.values) f << ' ' << k << '=' << v;
                f << '\n' << text;
                written.push_back(path);
            }
        for (const auto& w : written) out << w << '\n';
        return 0;
    } catch (const SpecError& e) {
        err << error_json("spec", e.what()).dump() << '\n';
    } catch (const OneCutError& e) {
        err << error_json("one_cut", e.what()).dump() << '\n';
    } catch (const SamplerError& e) {
        err << error_json("sampler", e.what()).dump() << '\n';
    } catch (const NumericalError& e) {
        err << error_json("numerical", e.what()).dump() << '\n';
    } catch (const std::exception& e) {
        err << error_json("runtime", e.what()).dump() << '\n';
    }
    return 1;
}

}  // namespace betaclt::cli
