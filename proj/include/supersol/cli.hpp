/**
 * @file cli.hpp
 * @brief Experiment configuration and the command runner behind the CLI.
 *
 * Config grammar (plain text, one `key = value` per line, `#` comments):
 *
 *     [scaffold]   d, N, T, mode (nonrecombining | recombining)
 *     [generator]  name, params (comma list), flags (+flag / -flag overrides)
 *     [payoff]     type (call | put | digital | identity | square | polynomial),
 *                  strike, scale, coeffs (polynomial, ascending powers)
 *     [command]    name (solve | verify | properties | duality | converge | stability),
 *                  seed, cases, n_list, split, terms, payoff_step, density_step
 *     [output]     dir
 *     [tolerances] eps_y, eps_z, property, verify
 *
 * Payoffs act on the terminal state sum W_T^1 + ... + W_T^d.
 */

#pragma once

#include "supersol/analysis.hpp"
#include "supersol/calculus.hpp"
#include "supersol/csv.hpp"
#include "supersol/error.hpp"
#include "supersol/generator.hpp"
#include "supersol/scaffold.hpp"
#include "supersol/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace supersol::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitViolation = 2;
inline constexpr int kExitSolverError = 3;
inline constexpr int kExitConfigError = 64;

struct Diagnostic {
    std::size_t line = 0;
    std::string field;
    std::string message;
};

inline std::string to_string(const Diagnostic& d) {
    return "line " + std::to_string(d.line) + ": " + d.field + ": " + d.message;
}

struct ExperimentConfig {
    std::size_t d = 1;
    std::size_t N = 4;
    double T = 1.0;
    TreeMode mode = TreeMode::nonrecombining;

    std::string generator;
    std::vector<double> params;
    std::vector<std::pair<std::string, bool>> flag_overrides;

    std::string payoff = "identity";
    double strike = 0.0;
    double scale = 1.0;
    std::vector<double> coeffs;

    std::string command = "solve";
    std::uint64_t seed = 7;
    std::size_t cases = 200;
    std::vector<std::size_t> n_list = {2, 4, 8, 16};
    std::optional<std::size_t> split;
    std::size_t terms = 30;
    double payoff_step = 1e-2;
    double density_step = 1e-2;

    std::string output_dir = "out";

    SolverTolerances solver;
    double property_tol = 1e-6;
    double verify_tol = 1e-9;
};

struct ParseResult {
    ExperimentConfig config;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
};

inline const std::vector<std::string>& generator_names() {
    static const std::vector<std::string> names = {"zero", "linear",    "abs",  "quadratic", "quadratic_capped",
                                                   "ypos", "expneg",    "ball"};
    return names;
}

inline const std::vector<std::string>& payoff_names() {
    static const std::vector<std::string> names = {"call", "put", "digital", "identity", "square", "polynomial"};
    return names;
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"solve",    "verify",   "properties",
                                                   "duality",  "converge", "stability"};
    return names;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::optional<double> to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline std::optional<std::uint64_t> to_unsigned(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

inline std::size_t expected_params(const std::string& name) {
    if (name == "zero" || name == "expneg") return 0;
    if (name == "linear") return 2;  // a (every coordinate), b
    if (name == "quadratic_capped") return 2;
    return 1;
}

}  // namespace detail

/**
 * Parses and validates a config. All problems are collected; the config is
 * usable only when no diagnostics are returned.
 */
inline ParseResult parse_config(const std::string& text) {
    ParseResult r;
    ExperimentConfig& c = r.config;
    auto diag = [&](std::size_t line, const std::string& field, const std::string& msg) {
        r.diagnostics.push_back({line, field, msg});
    };
    static const std::map<std::string, std::vector<std::string>> known = {
        {"scaffold", {"d", "N", "T", "mode"}},
        {"generator", {"name", "params", "flags"}},
        {"payoff", {"type", "strike", "scale", "coeffs"}},
        {"command", {"name", "seed", "cases", "n_list", "split", "terms", "payoff_step", "density_step"}},
        {"output", {"dir"}},
        {"tolerances", {"eps_y", "eps_z", "property", "verify"}}};

    std::map<std::string, std::size_t> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                diag(lineno, line, "unterminated section header");
                continue;
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!known.count(section)) diag(lineno, section, "unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            diag(lineno, line, "expected key = value");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const std::string field = section + "." + key;
        if (section.empty()) {
            diag(lineno, key, "key outside any section");
            continue;
        }
        const auto it = known.find(section);
        if (it == known.end()) continue;
        if (!detail::contains(it->second, key)) {
            diag(lineno, field, "unknown key");
            continue;
        }
        if (seen.count(field)) diag(lineno, field, "duplicate key (first on line " + std::to_string(seen[field]) + ")");
        seen[field] = lineno;

        auto number = [&](double& out) {
            if (auto v = detail::to_double(value)) out = *v;
            else diag(lineno, field, "not a finite number: '" + value + "'");
        };
        auto count = [&](std::size_t& out) {
            if (auto v = detail::to_unsigned(value)) out = static_cast<std::size_t>(*v);
            else diag(lineno, field, "not a non-negative integer: '" + value + "'");
        };
        auto positive = [&](double v) {
            if (!(v > 0.0)) diag(lineno, field, "must be positive");
        };

        if (field == "scaffold.d") {
            count(c.d);
            if (c.d == 0) diag(lineno, field, "must be at least 1");
        } else if (field == "scaffold.N") {
            count(c.N);
            if (c.N == 0) diag(lineno, field, "must be at least 1");
        } else if (field == "scaffold.T") {
            number(c.T);
            positive(c.T);
        } else if (field == "scaffold.mode") {
            if (value == "nonrecombining") c.mode = TreeMode::nonrecombining;
            else if (value == "recombining") c.mode = TreeMode::recombining;
            else diag(lineno, field, "expected nonrecombining or recombining");
        } else if (field == "generator.name") {
            c.generator = value;
            if (!detail::contains(generator_names(), value)) diag(lineno, field, "unknown generator '" + value + "'");
        } else if (field == "generator.params") {
            for (const auto& tok : detail::split_list(value)) {
                if (auto v = detail::to_double(tok)) c.params.push_back(*v);
                else diag(lineno, field, "not a finite number: '" + tok + "'");
            }
        } else if (field == "generator.flags") {
            static const std::vector<std::string> flags = {"positive", "increasing_y", "decreasing_y", "convex_z",
                                                           "lsc",      "y_independent", "jointly_convex"};
            for (const auto& tok : detail::split_list(value)) {
                if (tok.size() < 2 || (tok[0] != '+' && tok[0] != '-') || !detail::contains(flags, tok.substr(1))) {
                    diag(lineno, field, "expected +flag or -flag, got '" + tok + "'");
                    continue;
                }
                c.flag_overrides.emplace_back(tok.substr(1), tok[0] == '+');
            }
        } else if (field == "payoff.type") {
            c.payoff = value;
            if (!detail::contains(payoff_names(), value)) diag(lineno, field, "unknown payoff '" + value + "'");
        } else if (field == "payoff.strike") {
            number(c.strike);
        } else if (field == "payoff.scale") {
            number(c.scale);
        } else if (field == "payoff.coeffs") {
            for (const auto& tok : detail::split_list(value)) {
                if (auto v = detail::to_double(tok)) c.coeffs.push_back(*v);
                else diag(lineno, field, "not a finite number: '" + tok + "'");
            }
        } else if (field == "command.name") {
            c.command = value;
            if (!detail::contains(command_names(), value)) diag(lineno, field, "unknown command '" + value + "'");
        } else if (field == "command.seed") {
            if (auto v = detail::to_unsigned(value)) c.seed = *v;
            else diag(lineno, field, "not a non-negative integer: '" + value + "'");
        } else if (field == "command.cases") {
            count(c.cases);
        } else if (field == "command.n_list") {
            c.n_list.clear();
            for (const auto& tok : detail::split_list(value)) {
                auto v = detail::to_unsigned(tok);
                if (!v || *v == 0) {
                    diag(lineno, field, "not a positive integer: '" + tok + "'");
                    continue;
                }
                if (!c.n_list.empty() && *v <= c.n_list.back()) diag(lineno, field, "N-list must be ascending");
                c.n_list.push_back(static_cast<std::size_t>(*v));
            }
            if (c.n_list.empty()) diag(lineno, field, "empty N-list");
        } else if (field == "command.split") {
            std::size_t v = 0;
            count(v);
            c.split = v;
        } else if (field == "command.terms") {
            count(c.terms);
            if (c.terms == 0) diag(lineno, field, "must be at least 1");
        } else if (field == "command.payoff_step") {
            number(c.payoff_step);
            positive(c.payoff_step);
        } else if (field == "command.density_step") {
            number(c.density_step);
            positive(c.density_step);
        } else if (field == "output.dir") {
            c.output_dir = value;
            if (value.empty()) diag(lineno, field, "empty output directory");
        } else if (field == "tolerances.eps_y") {
            number(c.solver.eps_y);
            positive(c.solver.eps_y);
        } else if (field == "tolerances.eps_z") {
            number(c.solver.eps_z);
            positive(c.solver.eps_z);
        } else if (field == "tolerances.property") {
            number(c.property_tol);
            positive(c.property_tol);
        } else if (field == "tolerances.verify") {
            number(c.verify_tol);
            positive(c.verify_tol);
        }
    }

    if (c.generator.empty()) {
        diag(lineno, "generator.name", "missing generator name");
    } else if (detail::contains(generator_names(), c.generator)) {
        const std::size_t want = detail::expected_params(c.generator);
        if (c.params.size() != want) {
            const std::size_t line = seen.count("generator.params") ? seen["generator.params"] : seen["generator.name"];
            diag(line, "generator.params",
                 "generator '" + c.generator + "' takes " + std::to_string(want) + " parameter(s)");
        }
    }
    if (c.payoff == "polynomial" && c.coeffs.empty()) {
        diag(seen.count("payoff.type") ? seen["payoff.type"] : lineno, "payoff.coeffs",
             "polynomial payoff needs coefficients");
    }
    return r;
}

inline ParseResult load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ParseResult r;
        r.diagnostics.push_back({0, "config", "cannot open '" + path + "'"});
        return r;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Diagnostics only; never runs anything.
inline std::vector<Diagnostic> validate(const std::string& text) { return parse_config(text).diagnostics; }

inline Generator make_generator(const ExperimentConfig& c) {
    const auto& p = c.params;
    Generator g;
    if (c.generator == "zero") g = generators::zero(c.d);
    else if (c.generator == "linear") g = generators::linear(std::vector<double>(c.d, p[0]), p[1]);
    else if (c.generator == "abs") g = generators::abs_z(p[0], c.d);
    else if (c.generator == "quadratic") g = generators::quadratic(p[0], c.d);
    else if (c.generator == "quadratic_capped") g = generators::quadratic_capped(p[0], p[1], c.d);
    else if (c.generator == "ypos") g = generators::positive_part_y(p[0], c.d);
    else if (c.generator == "expneg") g = generators::exp_neg_y(c.d);
    else if (c.generator == "ball") g = generators::ball(p[0], c.d);
    else throw Error(ErrorCode::ConfigError, "unknown generator '" + c.generator + "'");
    for (const auto& [flag, on] : c.flag_overrides) {
        if (flag == "positive") g.flags.positive = on;
        else if (flag == "increasing_y") g.flags.increasing_y = on;
        else if (flag == "decreasing_y") g.flags.decreasing_y = on;
        else if (flag == "convex_z") g.flags.convex_z = on;
        else if (flag == "lsc") g.flags.lsc = on;
        else if (flag == "y_independent") g.flags.y_independent = on;
        else if (flag == "jointly_convex") g.flags.jointly_convex = on;
    }
    return g;
}

inline double payoff_value(const ExperimentConfig& c, double x) {
    if (c.payoff == "call") return c.scale * std::max(x - c.strike, 0.0);
    if (c.payoff == "put") return c.scale * std::max(c.strike - x, 0.0);
    if (c.payoff == "digital") return c.scale * (x > c.strike ? 1.0 : 0.0);
    if (c.payoff == "identity") return c.scale * x;
    if (c.payoff == "square") return c.scale * x * x;
    if (c.payoff == "polynomial") {
        double acc = 0.0;
        for (std::size_t i = c.coeffs.size(); i-- > 0;) acc = acc * x + c.coeffs[i];
        return acc;
    }
    throw Error(ErrorCode::ConfigError, "unknown payoff '" + c.payoff + "'");
}

inline TerminalCondition make_payoff(const ExperimentConfig& c, const Scaffold& s) {
    TerminalCondition xi;
    const std::size_t first = s.slice_begin(s.steps());
    for (std::size_t i = 0; i < s.leaf_count(); ++i) xi.values.push_back(payoff_value(c, s.state_sum(first + i)));
    return xi;
}

/// Output files keyed by name, written only once the whole command succeeded.
struct RunResult {
    int exit_code = kExitPass;
    std::map<std::string, std::string> files;
    std::string message;
};

namespace detail {

inline Supersolution solve_any(const Scaffold& s, const Generator& g, const TerminalCondition& xi,
                               const SolverTolerances& tol) {
    if (!g.flags.positive && g.lower_bound) return solve_reduced(s, g, xi, tol).original;
    BackwardOptions bo;
    bo.tol = tol;
    return backward_induce(s, g, xi, bo);
}

}  // namespace detail

/**
 * Executes the configured command in memory. Solver failures become exit
 * code 3 with the error text in `message`; no files are produced then.
 */
inline RunResult execute(const ExperimentConfig& c) {
    RunResult r;
    try {
        const Generator g = make_generator(c);
        std::ostringstream os;
        if (c.command == "converge") {
            os << "N,Y0,abs_delta\n";
            std::optional<double> prev;
            for (std::size_t n : c.n_list) {
                const Scaffold s = build_scaffold(c.d, n, c.T, c.mode);
                const double y0 = detail::solve_any(s, g, make_payoff(c, s), c.solver).Y[0];
                csv::row(os, {std::to_string(n), csv::number(y0), prev ? csv::number(std::abs(y0 - *prev)) : ""});
                prev = y0;
            }
            r.files["converge.csv"] = os.str();
            return r;
        }

        const Scaffold s = build_scaffold(c.d, c.N, c.T, c.mode);
        const TerminalCondition xi = make_payoff(c, s);
        if (c.command == "solve" || c.command == "verify") {
            const Supersolution sol = detail::solve_any(s, g, xi, c.solver);
            write_supersolution_csv(os, s, sol);
            r.files["supersolution.csv"] = os.str();
            if (c.command == "verify") {
                VerifyOptions vo;
                vo.tol = c.verify_tol;
                const VerifyReport rep = verify_supersolution(s, g, sol, xi, vo);
                std::ostringstream vs;
                csv::row(vs, {"pass", "worst_slack", "worst_node", "worst_successor", "terminal_ok",
                              "worst_terminal_gap", "worst_leaf", "integral_ok", "integral_worst"});
                csv::row(vs, {rep.pass ? "1" : "0", csv::number(rep.worst_slack), std::to_string(rep.worst_node),
                              std::to_string(rep.worst_successor), rep.terminal_ok ? "1" : "0",
                              csv::number(rep.worst_terminal_gap), std::to_string(rep.worst_leaf),
                              rep.integral.holds ? "1" : "0", csv::number(rep.integral.worst_violation)});
                r.files["verify.csv"] = vs.str();
                if (!rep.pass) r.exit_code = kExitViolation;
            }
        } else if (c.command == "properties") {
            PropertyOptions po;
            po.seed = c.seed;
            po.cases = c.cases;
            po.solver = c.solver;
            po.split = c.split;
            const PropertyReport rep = property_suite(g, s, po);
            write_property_summary_csv(os, rep);
            r.files["properties.csv"] = os.str();
            std::ostringstream cs;
            write_property_cases_csv(cs, rep);
            r.files["property_cases.csv"] = cs.str();
            if (!rep.passed(c.property_tol)) r.exit_code = kExitViolation;
        } else if (c.command == "duality") {
            DualOptions dopt;
            dopt.payoff_step = c.payoff_step;
            dopt.density_step = c.density_step;
            dopt.solver = c.solver;
            const DualCertificate cert = dual_search(s, g, xi, dopt);
            write_dual_csv(os, cert);
            r.files["dual.csv"] = os.str();
            if (cert.worst_weak_duality > c.verify_tol) r.exit_code = kExitViolation;
        } else if (c.command == "stability") {
            const ConvergenceTable t = generator_stability(s, dyadic_scalings(g, c.terms), g, xi, 1e-9, c.solver);
            write_table_csv(os, t);
            r.files["stability.csv"] = os.str();
            if (!t.nondecreasing || t.final_gap > c.property_tol) r.exit_code = kExitViolation;
        }
        if (r.exit_code == kExitViolation) r.message = "property violation beyond tolerance";
    } catch (const Error& e) {
        r.files.clear();
        r.exit_code = e.code() == ErrorCode::ConfigError ? kExitConfigError : kExitSolverError;
        r.message = e.what();
    }
    return r;
}

/// Writes the result files into `dir`, creating it if needed.
inline void write_outputs(const RunResult& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : r.files) {
        std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
        out << content;
        if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + name + "'");
    }
}

}  // namespace supersol::cli
