/**
 * @file analysis.hpp
 * @brief Executable structural properties of the minimal supersolution
 *        operator: a seeded property suite, comparison, stability studies and
 *        a brute-force dual certificate search.
 *
 * Conventions: every check reports a signed violation where values >= 0 mean
 * the property holds; equalities report -|difference|. Random terminal
 * conditions draw leaf values i.i.d. uniform on [-2, 2] from
 * Rng(mix_seed(seed, property, case)), so any row is reproducible from its
 * seed.
 */

#pragma once

#include "supersol/calculus.hpp"
#include "supersol/csv.hpp"
#include "supersol/error.hpp"
#include "supersol/generator.hpp"
#include "supersol/random.hpp"
#include "supersol/scaffold.hpp"
#include "supersol/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace supersol {

/// FNV-1a over the bytes of the given vectors.
inline std::uint64_t inputs_hash(std::initializer_list<const std::vector<double>*> parts) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* part : parts) {
        for (double v : *part) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof v);
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

inline TerminalCondition random_terminal(const Scaffold& s, Rng& rng, double lo = -2.0, double hi = 2.0) {
    TerminalCondition xi;
    xi.values.resize(s.leaf_count());
    for (double& v : xi.values) v = rng.uniform(lo, hi);
    return xi;
}

/// Leaf values of an F_k-measurable quantity given on slice k.
inline TerminalCondition extend_to_leaves(const Scaffold& s, std::size_t k, const std::vector<double>& slice_values) {
    if (slice_values.size() != s.slice_size(k)) fail(ErrorCode::InvalidArgument, "slice values size mismatch");
    TerminalCondition out;
    out.values.resize(s.leaf_count());
    const std::size_t first = s.slice_begin(s.steps());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = slice_values[s.ancestor(first + i, k) - s.slice_begin(k)];
    }
    return out;
}

inline std::vector<double> slice_of(const Scaffold& s, const AdaptedProcess& x, std::size_t k) {
    return {x.values.begin() + static_cast<std::ptrdiff_t>(s.slice_begin(k)),
            x.values.begin() + static_cast<std::ptrdiff_t>(s.slice_end(k))};
}

struct PropertyCase {
    std::string property;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::uint64_t hash = 0;
    double violation = 0.0;
    std::string witness;
};

struct PropertyResult {
    std::string name;
    std::size_t cases = 0;
    bool skipped = false;
    std::string skip_reason;
    double worst_violation = kInfinity;
    std::string witness;
};

struct PropertyReport {
    std::vector<PropertyResult> properties;
    std::vector<PropertyCase> rows;

    const PropertyResult* find(const std::string& name) const {
        for (const auto& p : properties) {
            if (p.name == name) return &p;
        }
        return nullptr;
    }

    bool passed(double tol) const {
        return std::all_of(properties.begin(), properties.end(),
                           [tol](const PropertyResult& p) { return p.skipped || p.worst_violation >= -tol; });
    }
};

struct PropertyOptions {
    std::uint64_t seed = 7;
    std::size_t cases = 200;
    SolverTolerances solver;
    /// Split step of the flow property; defaults to N / 2.
    std::optional<std::size_t> split;
    /// Subset of properties to run; empty runs all.
    std::vector<std::string> only;
};

inline const std::vector<std::string>& property_names() {
    static const std::vector<std::string> names = {
        "monotonicity",    "comparison_generator", "convexity", "cash_superadditivity", "cash_subadditivity",
        "cash_additivity", "flow",                 "time_consistency", "projectivity"};
    return names;
}

namespace detail {

inline std::uint64_t property_stream(const std::string& name) {
    const auto& names = property_names();
    const auto it = std::find(names.begin(), names.end(), name);
    return static_cast<std::uint64_t>(it - names.begin()) + 1;
}

inline double worst_node_gap(const Scaffold& s, const AdaptedProcess& hi, const AdaptedProcess& lo,
                             std::size_t from_step, std::size_t to_step, std::size_t* node) {
    double worst = kInfinity;
    for (std::size_t v = s.slice_begin(from_step); v < s.slice_end(to_step); ++v) {
        const double gap = hi[v] - lo[v];
        if (gap < worst) {
            worst = gap;
            if (node != nullptr) *node = v;
        }
    }
    return worst;
}

inline std::string at_node(std::size_t node) { return "node " + std::to_string(node); }

}  // namespace detail

/**
 * Runs the seeded property checks. Properties whose hypotheses the generator
 * or tree cannot meet are reported as skipped with the reason.
 */
inline PropertyReport property_suite(const Generator& g, const Scaffold& s, const PropertyOptions& opts = {}) {
    PropertyReport report;
    BackwardOptions bo;
    bo.tol = opts.solver;
    auto solve = [&](const Generator& gen, const TerminalCondition& xi) { return backward_induce(s, gen, xi, bo).Y; };
    const std::size_t N = s.steps();
    const bool tree = s.mode() == TreeMode::nonrecombining;

    auto wanted = [&](const std::string& name) {
        return opts.only.empty() || std::find(opts.only.begin(), opts.only.end(), name) != opts.only.end();
    };

    auto run = [&](const std::string& name, std::optional<std::string> skip,
                   const std::function<PropertyCase(Rng&)>& one) {
        if (!wanted(name)) return;
        PropertyResult res;
        res.name = name;
        if (skip) {
            res.skipped = true;
            res.skip_reason = *skip;
            res.worst_violation = 0.0;
            report.properties.push_back(std::move(res));
            return;
        }
        for (std::size_t c = 0; c < opts.cases; ++c) {
            const std::uint64_t seed = mix_seed(opts.seed, detail::property_stream(name), c);
            Rng rng(seed);
            PropertyCase pc = one(rng);
            pc.property = name;
            pc.index = c;
            pc.seed = seed;
            if (pc.violation < res.worst_violation) {
                res.worst_violation = pc.violation;
                res.witness = "case " + std::to_string(c) + " seed " + std::to_string(seed) + ": " + pc.witness;
            }
            ++res.cases;
            report.rows.push_back(std::move(pc));
        }
        report.properties.push_back(std::move(res));
    };

    run("monotonicity", std::nullopt, [&](Rng& rng) {
        const TerminalCondition xi = random_terminal(s, rng);
        TerminalCondition lower = xi;
        for (double& v : lower.values) v -= rng.uniform(0.0, 1.0);
        std::size_t node = 0;
        PropertyCase pc;
        pc.violation = detail::worst_node_gap(s, solve(g, xi), solve(g, lower), 0, N, &node);
        pc.hash = inputs_hash({&xi.values, &lower.values});
        pc.witness = detail::at_node(node);
        return pc;
    });

    run("comparison_generator", std::nullopt, [&](Rng& rng) {
        const TerminalCondition xi = random_terminal(s, rng);
        const double c = rng.uniform(0.0, 1.0);
        const Generator smaller = generators::scaled(g, c);
        std::size_t node = 0;
        PropertyCase pc;
        pc.violation = detail::worst_node_gap(s, solve(g, xi), solve(smaller, xi), 0, N, &node);
        const std::vector<double> extra = {c};
        pc.hash = inputs_hash({&xi.values, &extra});
        pc.witness = detail::at_node(node) + " scale " + csv::number(c);
        return pc;
    });

    const std::optional<std::string> not_convex =
        g.flags.jointly_convex ? std::nullopt : std::optional<std::string>("generator not declared jointly convex");
    run("convexity", not_convex, [&](Rng& rng) {
        const TerminalCondition a = random_terminal(s, rng);
        const TerminalCondition b = random_terminal(s, rng);
        const double lambda = rng.uniform(0.0, 1.0);
        TerminalCondition mix = a;
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = lambda * a[i] + (1.0 - lambda) * b[i];
        const AdaptedProcess ya = solve(g, a);
        const AdaptedProcess yb = solve(g, b);
        AdaptedProcess chord(s.node_count(), 0.0);
        for (std::size_t v = 0; v < s.node_count(); ++v) chord[v] = lambda * ya[v] + (1.0 - lambda) * yb[v];
        std::size_t node = 0;
        PropertyCase pc;
        pc.violation = detail::worst_node_gap(s, chord, solve(g, mix), 0, N, &node);
        const std::vector<double> extra = {lambda};
        pc.hash = inputs_hash({&a.values, &b.values, &extra});
        pc.witness = detail::at_node(node) + " lambda " + csv::number(lambda);
        return pc;
    });

    // m >= 0, F_t-measurable; constant on recombining trees
    auto cash_case = [&](Rng& rng, int sense) {
        const TerminalCondition xi = random_terminal(s, rng);
        const std::size_t t = static_cast<std::size_t>(rng.below(N + 1));
        std::vector<double> m_slice(s.slice_size(t));
        if (tree) {
            for (double& v : m_slice) v = rng.uniform(0.0, 1.0);
        } else {
            std::fill(m_slice.begin(), m_slice.end(), rng.uniform(0.0, 1.0));
        }
        TerminalCondition m_leaf;
        if (tree) {
            m_leaf = extend_to_leaves(s, t, m_slice);
        } else {
            m_leaf.values.assign(s.leaf_count(), m_slice.front());
        }
        TerminalCondition shifted = xi;
        for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += m_leaf[i];
        const AdaptedProcess y = solve(g, xi);
        const AdaptedProcess ym = solve(g, shifted);
        PropertyCase pc;
        pc.violation = kInfinity;
        std::size_t node = 0;
        for (std::size_t v = s.slice_begin(t); v < s.node_count(); ++v) {
            const double m = tree ? m_slice[s.ancestor(v, t) - s.slice_begin(t)] : m_slice.front();
            const double diff = ym[v] - y[v] - m;
            const double signed_v = sense > 0 ? diff : (sense < 0 ? -diff : -std::abs(diff));
            if (signed_v < pc.violation) {
                pc.violation = signed_v;
                node = v;
            }
        }
        pc.hash = inputs_hash({&xi.values, &m_leaf.values});
        pc.witness = detail::at_node(node) + " t " + std::to_string(t);
        return pc;
    };
    run("cash_superadditivity",
        g.flags.increasing_y || g.flags.y_independent ? std::nullopt
                                                      : std::optional<std::string>("generator not increasing in y"),
        [&](Rng& rng) { return cash_case(rng, +1); });
    run("cash_subadditivity",
        g.flags.decreasing_y || g.flags.y_independent ? std::nullopt
                                                      : std::optional<std::string>("generator not decreasing in y"),
        [&](Rng& rng) { return cash_case(rng, -1); });
    run("cash_additivity",
        g.flags.y_independent ? std::nullopt : std::optional<std::string>("generator depends on y"),
        [&](Rng& rng) { return cash_case(rng, 0); });

    const std::size_t split = opts.split.value_or(N / 2);
    if (split > N) fail(ErrorCode::InvalidArgument, "flow split beyond horizon");
    run("flow", std::nullopt, [&](Rng& rng) {
        const TerminalCondition xi = random_terminal(s, rng);
        const AdaptedProcess direct = solve(g, xi);
        BackwardOptions head = bo;
        head.terminal_step = split;
        const TerminalCondition mid(slice_of(s, direct, split));
        const AdaptedProcess composed = backward_induce(s, g, mid, head).Y;
        PropertyCase pc;
        pc.violation = kInfinity;
        std::size_t node = 0;
        for (std::size_t v = 0; v < s.slice_end(split); ++v) {
            const double dv = -std::abs(composed[v] - direct[v]);
            if (dv < pc.violation) {
                pc.violation = dv;
                node = v;
            }
        }
        pc.hash = inputs_hash({&xi.values});
        pc.witness = detail::at_node(node) + " split " + std::to_string(split);
        return pc;
    });

    std::optional<std::string> no_tc;
    if (!tree) no_tc = "needs a non-recombining tree";
    else if (!vanishes_at_zero_control(g, s.dimension())) no_tc = "g(y, 0) = 0 fails on samples";
    auto consistency_case = [&](Rng& rng, bool with_event) {
        const TerminalCondition xi = random_terminal(s, rng);
        const std::size_t t = static_cast<std::size_t>(rng.below(N + 1));
        std::vector<double> in_a(s.slice_size(t), 1.0);
        if (with_event) {
            for (double& v : in_a) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        }
        const TerminalCondition ind = extend_to_leaves(s, t, in_a);
        const AdaptedProcess y = solve(g, xi);
        TerminalCondition lhs = extend_to_leaves(s, t, slice_of(s, y, t));
        TerminalCondition rhs = xi;
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            lhs[i] *= ind[i];
            rhs[i] *= ind[i];
        }
        const AdaptedProcess yl = solve(g, lhs);
        const AdaptedProcess yr = solve(g, rhs);
        PropertyCase pc;
        pc.violation = kInfinity;
        std::size_t node = 0;
        for (std::size_t v = 0; v < s.slice_end(t); ++v) {
            const double dv = -std::abs(yl[v] - yr[v]);
            if (dv < pc.violation) {
                pc.violation = dv;
                node = v;
            }
        }
        pc.hash = inputs_hash({&xi.values, &ind.values});
        pc.witness = detail::at_node(node) + " t " + std::to_string(t);
        return pc;
    };
    run("time_consistency", no_tc, [&](Rng& rng) { return consistency_case(rng, false); });
    run("projectivity", no_tc, [&](Rng& rng) { return consistency_case(rng, true); });
    return report;
}

/// property,cases,skipped,worst_violation,witness
inline void write_property_summary_csv(std::ostream& os, const PropertyReport& r) {
    csv::row(os, {"property", "cases", "skipped", "worst_violation", "witness"});
    for (const auto& p : r.properties) {
        csv::row(os, {p.name, std::to_string(p.cases), p.skipped ? "1" : "0", csv::number(p.worst_violation),
                      "\"" + (p.skipped ? p.skip_reason : p.witness) + "\""});
    }
}

/// property,case,seed,inputs_hash,violation
inline void write_property_cases_csv(std::ostream& os, const PropertyReport& r) {
    csv::row(os, {"property", "case", "seed", "inputs_hash", "violation"});
    for (const auto& c : r.rows) {
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(c.hash));
        csv::row(os, {c.property, std::to_string(c.index), std::to_string(c.seed), hash, csv::number(c.violation)});
    }
}

struct ComparisonResult {
    bool holds = true;
    /// min over nodes of Y(xi, g) - Y(xi', g'); negative values violate.
    double worst_violation = kInfinity;
    std::size_t worst_node = 0;
};

/**
 * Y(xi', g') <= Y(xi, g) node-wise. Checks xi' <= xi and samples g' <= g
 * first (PreconditionUnmet otherwise).
 */
inline ComparisonResult comparison(const Scaffold& s, const TerminalCondition& xi, const TerminalCondition& xi_low,
                                   const Generator& g, const Generator& g_low, double tol = 1e-6,
                                   const SolverTolerances& stol = {}, std::size_t samples = 500) {
    if (xi.size() != xi_low.size()) fail(ErrorCode::InvalidArgument, "terminal condition size mismatch");
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (xi_low[i] > xi[i]) throw Error(ErrorCode::PreconditionUnmet, "xi' exceeds xi at a leaf", i);
    }
    Rng rng(11);
    std::vector<double> z(s.dimension());
    for (std::size_t i = 0; i < samples; ++i) {
        const std::size_t v = static_cast<std::size_t>(rng.below(s.nonterminal_count()));
        const double y = rng.uniform(-5.0, 5.0);
        for (double& zj : z) zj = rng.uniform(-3.0, 3.0);
        const double lo = g_low.fn(s.step_of(v), v, y, z);
        const double hi = g.fn(s.step_of(v), v, y, z);
        if (lo > hi + 1e-12 * std::max(1.0, std::abs(hi))) {
            fail(ErrorCode::PreconditionUnmet, "g' exceeds g at a sampled point");
        }
    }
    BackwardOptions bo;
    bo.tol = stol;
    const AdaptedProcess y = backward_induce(s, g, xi, bo).Y;
    const AdaptedProcess y_low = backward_induce(s, g_low, xi_low, bo).Y;
    ComparisonResult out;
    out.worst_violation = detail::worst_node_gap(s, y, y_low, 0, s.steps(), &out.worst_node);
    out.holds = out.worst_violation >= -tol;
    return out;
}

struct SequenceRow {
    std::size_t n = 0;
    double y0 = 0.0;
    double gap = 0.0;
};

struct ConvergenceTable {
    std::vector<SequenceRow> rows;
    double limit = 0.0;
    bool nondecreasing = true;
    double final_gap = 0.0;
};

/**
 * Y_0(xi^n) for an increasing sequence xi^n <= xi, against Y_0(xi).
 * `gap` is Y_0(xi) - Y_0(xi^n).
 */
inline ConvergenceTable monotone_convergence(const Scaffold& s, const Generator& g,
                                             const std::vector<TerminalCondition>& seq, const TerminalCondition& xi,
                                             double tol = 1e-9, const SolverTolerances& stol = {}) {
    if (seq.empty()) fail(ErrorCode::InvalidArgument, "empty sequence");
    for (std::size_t n = 0; n < seq.size(); ++n) {
        for (std::size_t i = 0; i < xi.size(); ++i) {
            const bool above_limit = seq[n][i] > xi[i];
            const bool decreasing = n > 0 && seq[n][i] < seq[n - 1][i];
            if (above_limit || decreasing) {
                throw Error(ErrorCode::PreconditionUnmet, "sequence is not increasing below its limit", n);
            }
        }
    }
    BackwardOptions bo;
    bo.tol = stol;
    ConvergenceTable t;
    t.limit = backward_induce(s, g, xi, bo).Y[0];
    for (std::size_t n = 0; n < seq.size(); ++n) {
        SequenceRow r;
        r.n = n + 1;
        r.y0 = backward_induce(s, g, seq[n], bo).Y[0];
        r.gap = t.limit - r.y0;
        if (!t.rows.empty() && r.y0 < t.rows.back().y0 - tol) t.nondecreasing = false;
        t.rows.push_back(r);
    }
    t.final_gap = std::abs(t.rows.back().gap);
    return t;
}

struct SemicontinuityCheck {
    /// liminf Y_0(xi^n) - Y_0(limit); >= 0 means the inequality holds.
    double slack = 0.0;
    double liminf_value = 0.0;
    double limit_value = 0.0;
    std::vector<double> values;
};

namespace detail {

/// Advances q (parts summing to K) to the next composition; false when exhausted.
inline bool next_composition(std::vector<std::size_t>& q, std::size_t K) {
    const std::size_t free = q.size() - 1;
    std::size_t used = 0;
    for (std::size_t i = 0; i < free; ++i) used += q[i];
    for (std::size_t i = 0; i < free; ++i) {
        if (used < K) {
            ++q[i];
            q[free] = K - used - 1;
            return true;
        }
        used -= q[i];
        q[i] = 0;
    }
    return false;
}

inline double tail_min(const std::vector<double>& v, std::size_t window) {
    const std::size_t w = std::min(window, v.size());
    return *std::min_element(v.end() - static_cast<std::ptrdiff_t>(w), v.end());
}

}  // namespace detail

/**
 * Fatou inequality Y_0(liminf xi^n) <= liminf Y_0(xi^n). On a finite sequence
 * both liminfs are taken as minima over the final `window` terms (leaf-wise
 * for the payoffs). Every term must dominate the common lower bound eta.
 */
inline SemicontinuityCheck fatou_check(const Scaffold& s, const Generator& g, const std::vector<TerminalCondition>& seq,
                                       const TerminalCondition& eta, std::size_t window = 2,
                                       const SolverTolerances& stol = {}) {
    if (seq.empty() || window == 0) fail(ErrorCode::InvalidArgument, "empty sequence or window");
    for (std::size_t n = 0; n < seq.size(); ++n) {
        for (std::size_t i = 0; i < eta.size(); ++i) {
            if (seq[n][i] < eta[i]) throw Error(ErrorCode::PreconditionUnmet, "term below the common lower bound", n);
        }
    }
    BackwardOptions bo;
    bo.tol = stol;
    SemicontinuityCheck out;
    for (const auto& x : seq) out.values.push_back(backward_induce(s, g, x, bo).Y[0]);
    TerminalCondition lim = seq.back();
    const std::size_t w = std::min(window, seq.size());
    for (std::size_t n = seq.size() - w; n < seq.size(); ++n) {
        for (std::size_t i = 0; i < lim.size(); ++i) lim[i] = std::min(lim[i], seq[n][i]);
    }
    out.limit_value = backward_induce(s, g, lim, bo).Y[0];
    out.liminf_value = detail::tail_min(out.values, window);
    out.slack = out.liminf_value - out.limit_value;
    return out;
}

/**
 * Lower semicontinuity liminf Y_0(xi^n) >= Y_0(xi) along xi^n -> xi in L^1.
 * The final term must be within l1_tol of xi in base-measure L^1 distance.
 */
inline SemicontinuityCheck lsc_check(const Scaffold& s, const Generator& g, const std::vector<TerminalCondition>& seq,
                                     const TerminalCondition& xi, std::size_t window = 2, double l1_tol = 1e-6,
                                     const SolverTolerances& stol = {}) {
    if (seq.empty() || window == 0) fail(ErrorCode::InvalidArgument, "empty sequence or window");
    double l1 = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) l1 += std::abs(seq.back()[i] - xi[i]);
    l1 /= static_cast<double>(xi.size());
    if (l1 > l1_tol) fail(ErrorCode::PreconditionUnmet, "sequence has not converged in L1");
    BackwardOptions bo;
    bo.tol = stol;
    SemicontinuityCheck out;
    for (const auto& x : seq) out.values.push_back(backward_induce(s, g, x, bo).Y[0]);
    out.limit_value = backward_induce(s, g, xi, bo).Y[0];
    out.liminf_value = detail::tail_min(out.values, window);
    out.slack = out.liminf_value - out.limit_value;
    return out;
}

/**
 * Y_0 under a pointwise increasing generator sequence g^n <= g. The ordering
 * is sampled first (PreconditionUnmet if a probe contradicts it).
 */
inline ConvergenceTable generator_stability(const Scaffold& s, const std::vector<Generator>& seq, const Generator& g,
                                            const TerminalCondition& xi, double tol = 1e-9,
                                            const SolverTolerances& stol = {}, std::size_t samples = 500) {
    if (seq.empty()) fail(ErrorCode::InvalidArgument, "empty generator sequence");
    Rng rng(13);
    std::vector<double> z(s.dimension());
    for (std::size_t i = 0; i < samples; ++i) {
        const std::size_t v = static_cast<std::size_t>(rng.below(s.nonterminal_count()));
        const std::size_t k = s.step_of(v);
        const double y = rng.uniform(-5.0, 5.0);
        for (double& zj : z) zj = rng.uniform(-3.0, 3.0);
        double prev = -kInfinity;
        for (const auto& gn : seq) {
            const double cur = gn.fn(k, v, y, z);
            if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev))) {
                fail(ErrorCode::PreconditionUnmet, "generator sequence is not increasing");
            }
            prev = cur;
        }
        const double top = g.fn(k, v, y, z);
        if (prev > top + 1e-12 * std::max(1.0, std::abs(top))) {
            fail(ErrorCode::PreconditionUnmet, "generator sequence exceeds its limit");
        }
    }
    BackwardOptions bo;
    bo.tol = stol;
    ConvergenceTable t;
    t.limit = backward_induce(s, g, xi, bo).Y[0];
    for (std::size_t n = 0; n < seq.size(); ++n) {
        SequenceRow r;
        r.n = n + 1;
        r.y0 = backward_induce(s, seq[n], xi, bo).Y[0];
        r.gap = t.limit - r.y0;
        if (!t.rows.empty() && r.y0 < t.rows.back().y0 - tol) t.nondecreasing = false;
        t.rows.push_back(r);
    }
    t.final_gap = std::abs(t.rows.back().gap);
    return t;
}

/// lambda_n |z|-style scalings c_n = 1 - 2^-n, n = 1..count, of a base generator.
inline std::vector<Generator> dyadic_scalings(const Generator& g, std::size_t count) {
    std::vector<Generator> out;
    for (std::size_t n = 1; n <= count; ++n) out.push_back(generators::scaled(g, 1.0 - std::ldexp(1.0, -static_cast<int>(n))));
    return out;
}

/// n,Y0,gap
inline void write_table_csv(std::ostream& os, const ConvergenceTable& t) {
    csv::row(os, {"n", "Y0", "gap"});
    for (const auto& r : t.rows) csv::row(os, {std::to_string(r.n), csv::number(r.y0), csv::number(r.gap)});
}

struct DualOptions {
    /// Spacing of the test-payoff grid.
    double payoff_step = 1e-2;
    /// Test payoffs range over [-radius, radius] on every free atom; 0 picks 2 + 2 max|xi|.
    double payoff_radius = 0.0;
    /// Spacing of the probability grid for the densities.
    double density_step = 1e-2;
    /// Maximal number of solver runs plus density probes.
    std::size_t budget = 2'000'000;
    SolverTolerances solver;
};

struct DualCertificate {
    /// Density against the base measure, one weight per leaf.
    std::vector<double> nu;
    double conjugate_value = 0.0;
    double lower_bound = -kInfinity;
    double primal = 0.0;
    double gap = 0.0;
    /// max over probed nu of lower_bound - primal; <= 0 is weak duality.
    double worst_weak_duality = -kInfinity;
    std::size_t densities_probed = 0;
    std::size_t payoffs_probed = 0;
};

/**
 * Best lower bound E[nu xi] - rho*(nu) over a grid of densities, where the
 * conjugate rho*(nu) = sup E[nu xi'] - Y_0(xi') is taken over a grid of test
 * payoffs that always contains xi and 0.
 *
 * For y-independent g the operator is cash additive, so rho* is +inf unless
 * E[nu] = 1 and test payoffs can be normalised to vanish on the last atom;
 * densities are therefore probability vectors on a simplex grid. Including
 * xi among the test payoffs makes weak duality hold by construction.
 */
inline DualCertificate dual_search(const Scaffold& s, const Generator& g, const TerminalCondition& xi,
                                   const DualOptions& opts = {}) {
    if (!g.flags.y_independent) fail(ErrorCode::PreconditionUnmet, "dual search needs a y-independent generator");
    const std::size_t M = s.leaf_count();
    if (M > 8) fail(ErrorCode::BudgetExceeded, "dual search is limited to 8 atoms");
    if (!(opts.payoff_step > 0.0) || !(opts.density_step > 0.0)) {
        fail(ErrorCode::InvalidArgument, "grid steps must be positive");
    }
    double xmax = 0.0;
    for (double v : xi.values) xmax = std::max(xmax, std::abs(v));
    const double radius = opts.payoff_radius > 0.0 ? opts.payoff_radius : 2.0 + 2.0 * xmax;
    const auto half = static_cast<std::size_t>(std::floor(radius / opts.payoff_step + 1e-9));
    const std::size_t per_atom = 2 * half + 1;
    const auto K = static_cast<std::size_t>(std::llround(1.0 / opts.density_step));
    if (std::abs(static_cast<double>(K) * opts.density_step - 1.0) > 1e-9) {
        fail(ErrorCode::InvalidArgument, "density step must divide one");
    }

    double payoff_count = 1.0;
    for (std::size_t i = 0; i + 1 < M; ++i) payoff_count *= static_cast<double>(per_atom);
    double density_count = 1.0;  // C(K + M - 1, M - 1)
    for (std::size_t i = 1; i < M; ++i) density_count = density_count * static_cast<double>(K + i) / static_cast<double>(i);
    if (payoff_count + density_count * (payoff_count + 2.0) > static_cast<double>(opts.budget)) {
        fail(ErrorCode::BudgetExceeded, "dual search grid exceeds the budget");
    }

    BackwardOptions bo;
    bo.tol = opts.solver;
    std::vector<std::vector<double>> payoffs;
    std::vector<double> values;
    auto add = [&](std::vector<double> p) {
        values.push_back(backward_induce(s, g, TerminalCondition(p), bo).Y[0]);
        payoffs.push_back(std::move(p));
    };
    add(xi.values);
    add(std::vector<double>(M, 0.0));
    std::vector<std::size_t> idx(M > 0 ? M - 1 : 0, 0);
    while (true) {
        std::vector<double> p(M, 0.0);
        for (std::size_t i = 0; i + 1 < M; ++i) {
            p[i] = (static_cast<double>(idx[i]) - static_cast<double>(half)) * opts.payoff_step;
        }
        add(std::move(p));
        std::size_t i = 0;
        while (i < idx.size() && ++idx[i] == per_atom) idx[i++] = 0;
        if (i == idx.size()) break;
    }

    DualCertificate best;
    best.primal = values.front();
    best.payoffs_probed = payoffs.size();
    const double base = 1.0 / static_cast<double>(M);
    std::vector<std::size_t> q(M, 0);
    q[M - 1] = K;
    // compositions of K into M parts: odometer on the first M - 1 parts
    std::vector<double> nu(M);
    while (true) {
        for (std::size_t i = 0; i < M; ++i) nu[i] = static_cast<double>(q[i]) / static_cast<double>(K) / base;
        double conj = -kInfinity;
        for (std::size_t j = 0; j < payoffs.size(); ++j) {
            double e = 0.0;
            for (std::size_t i = 0; i < M; ++i) e += base * nu[i] * payoffs[j][i];
            conj = std::max(conj, e - values[j]);
        }
        double e_xi = 0.0;
        for (std::size_t i = 0; i < M; ++i) e_xi += base * nu[i] * xi[i];
        const double lb = e_xi - conj;
        best.worst_weak_duality = std::max(best.worst_weak_duality, lb - best.primal);
        ++best.densities_probed;
        if (lb > best.lower_bound) {
            best.lower_bound = lb;
            best.conjugate_value = conj;
            best.nu = nu;
        }
        if (!detail::next_composition(q, K)) break;
    }
    best.gap = best.primal - best.lower_bound;
    return best;
}

/// atom,nu followed by a summary row block
inline void write_dual_csv(std::ostream& os, const DualCertificate& c) {
    csv::row(os, {"atom", "nu"});
    for (std::size_t i = 0; i < c.nu.size(); ++i) csv::row(os, {std::to_string(i), csv::number(c.nu[i])});
    csv::row(os, {"quantity", "value"});
    csv::row(os, {"primal", csv::number(c.primal)});
    csv::row(os, {"conjugate", csv::number(c.conjugate_value)});
    csv::row(os, {"lower_bound", csv::number(c.lower_bound)});
    csv::row(os, {"gap", csv::number(c.gap)});
    csv::row(os, {"worst_weak_duality", csv::number(c.worst_weak_duality)});
    csv::row(os, {"densities_probed", std::to_string(c.densities_probed)});
    csv::row(os, {"payoffs_probed", std::to_string(c.payoffs_probed)});
}

}  // namespace supersol
