#pragma once

#include <cctype>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "betaclt/equilibrium.hpp"
#include "betaclt/potential.hpp"

namespace betaclt {

class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

/// Splits "name(a,b,c)" into name and numeric arguments; "name" alone has no arguments.
inline std::pair<std::string, std::vector<double>> parse_call(const std::string& spec) {
    const std::string s = trim(spec);
    const auto open = s.find('(');
    if (open == std::string::npos) return {s, {}};
    if (s.back() != ')') throw SpecError("malformed spec '" + spec + "': missing ')'");
    std::string name = trim(s.substr(0, open));
    std::vector<double> args;
    std::stringstream body(s.substr(open + 1, s.size() - open - 2));
    std::string tok;
    while (std::getline(body, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) throw SpecError("malformed spec '" + spec + "': empty argument");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw SpecError("malformed spec '" + spec + "': '" + tok + "' is not a number");
        }
        if (used != tok.size()) throw SpecError("malformed spec '" + spec + "': '" + tok + "' is not a number");
        args.push_back(v);
    }
    return {name, args};
}

}  // namespace detail

/// Built-in potentials: "gaussian" (x²), "quartic(t)" (x² + t x⁴, normalized), "poly(c0,...,ck)" (normalized).
[[nodiscard]] inline Potential make_potential(const std::string& spec) {
    auto [name, args] = detail::parse_call(spec);
    if (name == "gaussian") {
        if (!args.empty()) throw SpecError("gaussian takes no arguments");
        return gaussian_potential();
    }
    std::vector<double> c;
    if (name == "quartic") {
        if (args.size() != 1) throw SpecError("quartic(t) takes one argument");
        if (!(args[0] >= 0.0)) throw SpecError("quartic(t) requires t >= 0");
        c = {0.0, 0.0, 1.0, 0.0, args[0]};
    } else if (name == "poly") {
        if (args.size() < 3) throw SpecError("poly(c0,...,ck) needs degree >= 2");
        c = args;
    } else {
        throw SpecError("unknown potential '" + spec + "'");
    }
    auto raw = polynomial_potential(detail::trim(spec), c);
    auto n = normalize_potential(raw);
    n.W.name = detail::trim(spec);
    return n.W;
}

/// Built-in test functions: "x2" (x²), "T(k)", "poly(c0,...)", "exp(a)", "sin(a)", "cos(a)".
[[nodiscard]] inline TestFunction make_function(const std::string& spec) {
    auto [name, args] = detail::parse_call(spec);
    TestFunction f;
    if (name == "x2" || name == "x^2") {
        f = fn::polynomial("x2", {0.0, 0.0, 1.0});
    } else if (name == "T") {
        if (args.size() != 1 || args[0] < 0 || args[0] != static_cast<int>(args[0]))
            throw SpecError("T(k) takes one nonnegative integer");
        f = fn::chebyshev_t(static_cast<int>(args[0]));
    } else if (name == "poly") {
        if (args.empty()) throw SpecError("poly needs coefficients");
        f = fn::polynomial("poly", args);
    } else if (name == "exp" || name == "sin" || name == "cos") {
        const double a = args.empty() ? 1.0 : args[0];
        if (args.size() > 1) throw SpecError(name + "(a) takes at most one argument");
        f = name == "exp" ? fn::exponential(a) : name == "sin" ? fn::sine(a) : fn::cosine(a);
    } else {
        throw SpecError("unknown test function '" + spec + "'");
    }
    f.name = detail::trim(spec);
    return f;
}

}  // namespace betaclt
