/**
 * @file solver.hpp
 * @brief Minimal supersolutions by backward induction on a scaffold.
 *
 * On every step the discrete supersolution inequality reads
 *
 *     Y_k - g(Y_k, Z_k) dt + Z_k . dW_s >= Y_{k+1,s}    for every successor s,
 *
 * so the smallest admissible value at a node is the least y with
 * y >= F(y), where
 *
 *     F(y) = inf_z  max_s (Y_{k+1,s} - z . dW_s) + g(y, z) dt.
 *
 * The inner infimum is a convex search in z; the outer fixed point is the
 * root of G(y) = y - F(y), found by safeguarded regula falsi. G is increasing
 * when g decreases in y, or increases in y with Lipschitz constant L and
 * L dt < 1.
 */

#pragma once

#include "supersol/convex_search.hpp"
#include "supersol/csv.hpp"
#include "supersol/error.hpp"
#include "supersol/generator.hpp"
#include "supersol/scaffold.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace supersol {

struct SolverTolerances {
    double eps_y = 1e-8;
    double eps_z = 1e-8;
    /// Doublings allowed when growing the upper y-bracket (factor 2^12).
    int max_bracket_doublings = 12;
};

enum class Monotonicity { increasing, decreasing, y_independent };

struct Successor {
    double probability = 0.0;
    std::vector<double> increment;
    double next_value = 0.0;
};

struct NodeProgram {
    std::vector<Successor> successors;
    double dt = 1.0;
    std::function<double(double y, Control z)> generator;
    std::optional<double> y_lipschitz;
    SolverTolerances tol;
    /// Initial golden-section step in z; 0 picks one from the data.
    double z_step = 0.0;
};

struct NodeSolution {
    double y = 0.0;
    std::vector<double> z;
    std::vector<double> slack;
};

namespace detail {

/// Solves the small dense system a x = b in place; false if singular.
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        }
        if (std::abs(a[piv * n + c]) < 1e-300) return false;
        if (piv != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
            std::swap(b[c], b[piv]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r * n + c] / a[c * n + c];
            for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
            b[r] -= f * b[c];
        }
    }
    for (std::size_t c = n; c-- > 0;) {
        double acc = b[c];
        for (std::size_t k = c + 1; k < n; ++k) acc -= a[c * n + k] * b[k];
        b[c] = acc / a[c * n + c];
    }
    return true;
}

/**
 * Points where d + 1 of the affine pieces Y_s - z . dW_s coincide. The
 * piecewise linear part of the node objective attains its minimum at one of
 * them, so they make exact seeds for the convex search.
 */
inline std::vector<std::vector<double>> vertex_candidates(const std::vector<Successor>& succ, std::size_t d) {
    std::vector<std::vector<double>> out;
    const std::size_t m = succ.size();
    if (d > 3 || m < d + 1) return out;
    std::vector<std::size_t> pick(d + 1);
    for (std::size_t i = 0; i <= d; ++i) pick[i] = i;
    while (true) {
        std::vector<double> a(d * d), b(d);
        const Successor& s0 = succ[pick[0]];
        for (std::size_t r = 0; r < d; ++r) {
            const Successor& sr = succ[pick[r + 1]];
            for (std::size_t c = 0; c < d; ++c) a[r * d + c] = sr.increment[c] - s0.increment[c];
            b[r] = sr.next_value - s0.next_value;
        }
        if (solve_dense(a, b, d)) out.push_back(b);
        // next combination
        std::size_t i = d + 1;
        while (i-- > 0) {
            if (pick[i] < m - (d + 1 - i)) break;
            if (i == 0) return out;
        }
        if (pick[i] >= m - (d + 1 - i)) return out;
        ++pick[i];
        for (std::size_t j = i + 1; j <= d; ++j) pick[j] = pick[j - 1] + 1;
    }
}

inline double max_affine(const std::vector<Successor>& succ, Control z) {
    double worst = -kInfinity;
    for (const Successor& s : succ) worst = std::max(worst, s.next_value - dot(z, s.increment));
    return worst;
}

}  // namespace detail

/**
 * Minimal y (and an attaining z) for one node program.
 *
 * Errors: GeneratorInfeasible when every probed (y, z) gives +inf,
 * ContractionViolated for increasing generators without L dt < 1, NoBracket
 * when the upper y-bracket cannot be found within the doubling cap.
 */
inline NodeSolution solve_node(const NodeProgram& p, Monotonicity mono) {
    if (p.successors.size() < 2) fail(ErrorCode::InvalidArgument, "node program needs at least two successors");
    for (const Successor& s : p.successors) {
        if (!(s.probability > 0.0)) fail(ErrorCode::InvalidArgument, "successor probabilities must be positive");
    }
    if (mono == Monotonicity::increasing) {
        if (!p.y_lipschitz || !(*p.y_lipschitz * p.dt < 1.0)) {
            fail(ErrorCode::ContractionViolated, "increasing generator needs L_y * dt < 1");
        }
    }
    const std::size_t d = p.successors.front().increment.size();
    const auto& succ = p.successors;

    std::vector<std::vector<double>> seeds;
    seeds.emplace_back(d, 0.0);
    for (auto& v : detail::vertex_candidates(succ, d)) seeds.push_back(std::move(v));
    for (std::size_t j = 0; j < d; ++j) {
        for (double sign : {1.0, -1.0}) {
            std::vector<double> e(d, 0.0);
            e[j] = sign;
            seeds.push_back(std::move(e));
        }
    }

    // g dropped: the smallest value any supersolution can take here (g >= 0)
    Objective free_objective = [&](Control z) { return detail::max_affine(succ, z); };
    SearchOptions opts;
    opts.tol = p.tol.eps_z;
    double scale = 0.0;
    for (std::size_t i = 1; i < std::min<std::size_t>(seeds.size(), 2 + (d <= 3 ? 70 : 0)); ++i) {
        for (double v : seeds[i]) scale = std::max(scale, std::abs(v));
    }
    opts.initial_step = p.z_step > 0.0 ? p.z_step : 0.1 * std::max(1.0, scale);
    const SearchResult free_min = minimize_convex(free_objective, d, seeds, opts);
    seeds.push_back(free_min.x);

    auto inner = [&](double y) {
        Objective objective = [&](Control z) {
            const double gv = p.generator(y, z);
            if (std::isinf(gv)) return gv;
            return detail::max_affine(succ, z) + gv * p.dt;
        };
        return minimize_convex(objective, d, seeds, opts);
    };

    auto finish = [&](double y, const SearchResult& r) {
        NodeSolution sol;
        sol.y = y;
        sol.z = r.x;
        const double gv = p.generator(y, sol.z);
        sol.slack.resize(succ.size());
        for (std::size_t s = 0; s < succ.size(); ++s) {
            sol.slack[s] = y - gv * p.dt + dot(sol.z, succ[s].increment) - succ[s].next_value;
        }
        return sol;
    };

    if (mono == Monotonicity::y_independent) {
        const SearchResult r = inner(0.0);
        if (!r.feasible) fail(ErrorCode::GeneratorInfeasible, "generator is +inf for every probed control");
        return finish(r.value, r);
    }

    bool any_finite = false;
    auto gap = [&](double y, SearchResult& r) {
        r = inner(y);
        if (!r.feasible) return -kInfinity;
        any_finite = true;
        return y - r.value;
    };

    double lo = free_min.value;
    SearchResult at_hi;
    if (gap(lo, at_hi) >= 0.0) return finish(lo, at_hi);

    const double base_step = std::max(1.0, std::abs(lo));
    double hi = lo;
    bool bracketed = false;
    double step = base_step;
    for (int i = 0; i <= p.tol.max_bracket_doublings; ++i, step *= 2.0) {
        const double cand = lo + step;
        if (gap(cand, at_hi) >= 0.0) {
            hi = cand;
            bracketed = true;
            break;
        }
        lo = cand;
    }
    if (!bracketed) {
        if (!any_finite) fail(ErrorCode::GeneratorInfeasible, "generator is +inf for every probed (y, z)");
        fail(ErrorCode::NoBracket, "fixed point in y exceeds the bracket expansion cap");
    }
    // y - F(y) is increasing, so Illinois regula falsi keeps a feasible upper end and
    // drives it onto the root; bisection takes over where the lower end is infeasible
    SearchResult probe;
    double g_lo = gap(lo, probe);
    double g_hi = hi - at_hi.value;
    int kept = 0;
    for (int it = 0; it < 400; ++it) {
        const double width = hi - lo;
        if (width <= p.tol.eps_y && g_hi <= 1e-12 * std::max(1.0, std::abs(hi))) break;
        double mid = 0.5 * (lo + hi);
        if (std::isfinite(g_lo) && g_hi - g_lo > 0.0) {
            const double t = hi - g_hi * width / (g_hi - g_lo);
            if (t > lo && t < hi) mid = t;
        }
        if (mid <= lo || mid >= hi) break;
        const double gm = gap(mid, probe);
        if (gm >= 0.0) {
            hi = mid;
            g_hi = gm;
            at_hi = probe;
            if (kept < 0 && std::isfinite(g_lo)) g_lo *= 0.5;
            kept = kept < 0 ? kept - 1 : -1;
        } else {
            lo = mid;
            g_lo = gm;
            if (kept > 0) g_hi *= 0.5;
            kept = kept > 0 ? kept + 1 : 1;
        }
    }
    return finish(hi, at_hi);
}

/**
 * A candidate pair (Y, Z) with its per-step slacks (the increments of the
 * increasing process K) and terminal gap Y_T - xi. `terminal_step` is the
 * horizon slice; nodes beyond it carry NaN.
 */
struct Supersolution {
    AdaptedProcess Y;
    PredictableProcess Z;
    /// slack[node * branching + s] for nodes before terminal_step.
    std::vector<double> slack;
    /// One entry per node of the terminal slice.
    std::vector<double> terminal_gap;
    std::size_t terminal_step = 0;
};

struct BackwardOptions {
    SolverTolerances tol;
    /// Measure used for the node programs and admissibility; base if null.
    const Measure* measure = nullptr;
    /// Girsanov kernel a: increments become dW - a dt. Not owned.
    const PredictableProcess* drift = nullptr;
    /// Horizon slice m; the terminal condition is given on slice m. Defaults to N.
    std::optional<std::size_t> terminal_step;
    bool check_flags = true;
};

inline Monotonicity monotonicity_of(const Generator& g) {
    if (g.flags.y_independent) return Monotonicity::y_independent;
    if (g.flags.decreasing_y) return Monotonicity::decreasing;
    if (g.flags.increasing_y) return Monotonicity::increasing;
    fail(ErrorCode::PreconditionUnmet, "generator must be y-independent, increasing or decreasing in y");
}

inline std::vector<double> step_increment(const Scaffold& s, std::size_t node, std::size_t sc,
                                          const PredictableProcess* drift) {
    const auto inc = s.increment(sc);
    std::vector<double> w(inc.begin(), inc.end());
    if (drift != nullptr) {
        const auto a = drift->at(node);
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= a[j] * s.dt();
    }
    return w;
}

/// Slacks and terminal gaps of an arbitrary pair (Y, Z).
inline Supersolution assemble(const Scaffold& s, const Generator& g, AdaptedProcess Y, PredictableProcess Z,
                              const TerminalCondition& xi, std::size_t terminal_step,
                              const PredictableProcess* drift = nullptr) {
    Supersolution out;
    out.terminal_step = terminal_step;
    const std::size_t B = s.branching();
    const std::size_t active = s.slice_begin(terminal_step);
    out.slack.assign(active * B, 0.0);
    for (std::size_t v = 0; v < active; ++v) {
        const auto z = Z.at(v);
        const double gv = g.fn(s.step_of(v), v, Y[v], z);
        for (std::size_t sc = 0; sc < B; ++sc) {
            const auto w = step_increment(s, v, sc, drift);
            out.slack[v * B + sc] = Y[v] - gv * s.dt() + dot(z, w) - Y[s.successor(v, sc)];
        }
    }
    out.terminal_gap.resize(s.slice_size(terminal_step));
    for (std::size_t i = 0; i < out.terminal_gap.size(); ++i) {
        out.terminal_gap[i] = Y[s.slice_begin(terminal_step) + i] - xi[i];
    }
    out.Y = std::move(Y);
    out.Z = std::move(Z);
    return out;
}

/**
 * Minimal supersolution of (g, xi) by backward induction. Requires g
 * positive and convex in z, and monotone or constant in y. On recombining
 * trees g must be state-Markov.
 */
inline Supersolution backward_induce(const Scaffold& s, const Generator& g, const TerminalCondition& xi,
                                     const BackwardOptions& opts = {}) {
    const std::size_t m = opts.terminal_step.value_or(s.steps());
    if (m > s.steps()) fail(ErrorCode::InvalidArgument, "terminal step beyond horizon");
    if (xi.size() != s.slice_size(m)) fail(ErrorCode::InvalidArgument, "terminal condition size mismatch");
    for (double v : xi.values) {
        if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "terminal condition must be finite");
    }
    if (opts.check_flags && (!g.flags.positive || !g.flags.convex_z)) {
        fail(ErrorCode::PreconditionUnmet, "solver needs a positive generator convex in z");
    }
    if (s.mode() == TreeMode::recombining && !g.flags.state_markov) {
        fail(ErrorCode::PreconditionUnmet, "recombining trees need a state-Markov generator");
    }
    const Monotonicity mono = monotonicity_of(g);
    std::optional<Measure> base;
    if (opts.measure == nullptr) base.emplace(Measure::base(s));
    const Measure& mu = opts.measure == nullptr ? *base : *opts.measure;

    const std::size_t d = s.dimension();
    const std::size_t B = s.branching();
    AdaptedProcess Y(s.node_count(), std::numeric_limits<double>::quiet_NaN());
    PredictableProcess Z(s.nonterminal_count(), d, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < xi.size(); ++i) Y[s.slice_begin(m) + i] = xi[i];

    NodeProgram prog;
    prog.dt = s.dt();
    prog.tol = opts.tol;
    prog.y_lipschitz = g.y_lipschitz;
    prog.successors.resize(B);
    for (std::size_t k = m; k-- > 0;) {
        for (std::size_t v = s.slice_begin(k); v < s.slice_end(k); ++v) {
            for (std::size_t sc = 0; sc < B; ++sc) {
                prog.successors[sc].probability = mu.probability(v, sc);
                prog.successors[sc].increment = step_increment(s, v, sc, opts.drift);
                prog.successors[sc].next_value = Y[s.successor(v, sc)];
            }
            prog.generator = [&g, k, v](double y, Control z) { return g.fn(k, v, y, z); };
            try {
                const NodeSolution sol = solve_node(prog, mono);
                Y[v] = sol.y;
                std::copy(sol.z.begin(), sol.z.end(), Z.at(v).begin());
            } catch (const Error& e) {
                throw e.with_node(v);
            }
        }
    }
    return assemble(s, g, std::move(Y), std::move(Z), xi, m, opts.drift);
}

struct VerifyOptions {
    double tol = 1e-9;
    const Measure* measure = nullptr;
    const PredictableProcess* drift = nullptr;
};

struct VerifyReport {
    bool pass = false;
    double worst_slack = kInfinity;
    std::size_t worst_node = 0;
    std::size_t worst_successor = 0;
    bool terminal_ok = false;
    double worst_terminal_gap = kInfinity;
    std::size_t worst_leaf = 0;
    SupermartingaleCheck integral;
};

/**
 * Checks the discrete supersolution inequality on every edge, Y >= xi on the
 * terminal slice, and that the integral of Z is a supermartingale.
 */
inline VerifyReport verify_supersolution(const Scaffold& s, const Generator& g, const AdaptedProcess& Y,
                                         const PredictableProcess& Z, const TerminalCondition& xi,
                                         const VerifyOptions& opts = {},
                                         std::optional<std::size_t> terminal_step = std::nullopt) {
    const std::size_t m = terminal_step.value_or(s.steps());
    const Supersolution cand = assemble(s, g, Y, Z, xi, m, opts.drift);
    VerifyReport r;
    const std::size_t B = s.branching();
    for (std::size_t i = 0; i < cand.slack.size(); ++i) {
        const double sl = std::isnan(cand.slack[i]) ? -kInfinity : cand.slack[i];
        if (sl < r.worst_slack) {
            r.worst_slack = sl;
            r.worst_node = i / B;
            r.worst_successor = i % B;
        }
    }
    for (std::size_t i = 0; i < cand.terminal_gap.size(); ++i) {
        const double gp = std::isnan(cand.terminal_gap[i]) ? -kInfinity : cand.terminal_gap[i];
        if (gp < r.worst_terminal_gap) {
            r.worst_terminal_gap = gp;
            r.worst_leaf = s.slice_begin(m) + i;
        }
    }
    r.terminal_ok = r.worst_terminal_gap >= -opts.tol;
    std::optional<Measure> base;
    if (opts.measure == nullptr) base.emplace(Measure::base(s));
    const Measure& mu = opts.measure == nullptr ? *base : *opts.measure;
    r.integral = integral_is_supermartingale(s, Z, mu, opts.tol, opts.drift);
    r.pass = r.worst_slack >= -opts.tol && r.terminal_ok && r.integral.holds;
    return r;
}

inline VerifyReport verify_supersolution(const Scaffold& s, const Generator& g, const Supersolution& cand,
                                         const TerminalCondition& xi, const VerifyOptions& opts = {}) {
    return verify_supersolution(s, g, cand.Y, cand.Z, xi, opts, cand.terminal_step);
}

struct BruteForceResult {
    double y0 = 0.0;
    AdaptedProcess Y;
    std::size_t evaluations = 0;
};

/**
 * Independent grid oracle for d = 1 trees with at most 15 nodes.
 *
 * At every node the control runs over an exhaustive grid centred on the
 * reference control (+-1) and the value over a grid centred on the reference
 * value (+-1); the smallest feasible grid value is kept and fed to the
 * parent. Internal resolutions are h / (2N) in y and a matching step in z,
 * so the root value over-estimates the discrete minimum by at most about h.
 */
inline BruteForceResult brute_force_min(const Scaffold& s, const Generator& g, const TerminalCondition& xi,
                                        double h, const Supersolution& reference,
                                        std::size_t max_evaluations = 2'000'000'000ULL) {
    if (s.dimension() != 1 || s.node_count() > 15) {
        fail(ErrorCode::BudgetExceeded, "brute force oracle is limited to d = 1 and 15 nodes");
    }
    if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "grid resolution must be positive");
    const Monotonicity mono = monotonicity_of(g);
    const std::size_t N = s.steps();
    const double dt = s.dt();
    const double hy = h / (2.0 * static_cast<double>(N));
    // grids are shifted off the reference point so that agreement is not automatic
    constexpr double kGridOffset = 0.3819660112501051;

    BruteForceResult out;
    out.Y = AdaptedProcess(s.node_count(), 0.0);
    for (std::size_t i = 0; i < xi.size(); ++i) out.Y[s.slice_begin(N) + i] = xi[i];

    for (std::size_t v = s.nonterminal_count(); v-- > 0;) {
        const std::size_t k = s.step_of(v);
        const double y_ref = reference.Y[v];
        const double z_ref = reference.Z.at(v)[0];
        const double up = out.Y[s.successor(v, 0)];
        const double down = out.Y[s.successor(v, 1)];
        const double w_up = s.increment(0)[0];
        const double w_down = s.increment(1)[0];

        // slope bound of the z-objective on [z_ref - 1, z_ref + 1]
        double g_slope = 0.0;
        const std::size_t coarse = 64;
        double prev = 0.0;
        bool have_prev = false;
        for (std::size_t i = 0; i <= coarse; ++i) {
            const double z = z_ref - 1.0 + 2.0 * static_cast<double>(i) / coarse;
            const double val = g.fn(k, v, y_ref, std::span<const double>(&z, 1));
            if (std::isfinite(val) && have_prev) g_slope = std::max(g_slope, std::abs(val - prev) * coarse / 2.0);
            have_prev = std::isfinite(val);
            prev = val;
        }
        const double slope = std::max(std::abs(w_up), std::abs(w_down)) + dt * 2.0 * g_slope + 1e-12;
        const double hz = hy / slope;
        const auto half = static_cast<std::size_t>(std::ceil(1.0 / hz));
        const auto ny = static_cast<std::size_t>(std::ceil(2.0 / hy));

        auto rhs = [&](double y, double z) {
            const double gv = g.fn(k, v, y, std::span<const double>(&z, 1));
            if (std::isinf(gv)) return kInfinity;
            return std::max(up - z * w_up, down - z * w_down) + gv * dt;
        };
        auto feasible = [&](double y) {
            for (std::size_t i = 0; i <= 2 * half; ++i) {
                const double z = z_ref + (static_cast<double>(i) - static_cast<double>(half) + kGridOffset) * hz;
                ++out.evaluations;
                if (y >= rhs(y, z) - 1e-13) return true;
            }
            return false;
        };
        if (out.evaluations + (2 * half + 1) * 64 > max_evaluations) {
            fail(ErrorCode::BudgetExceeded, "brute force grid too large");
        }

        const double y_lo = y_ref - 1.0 + kGridOffset * hy;
        std::size_t found;
        if (mono == Monotonicity::y_independent) {
            double best = kInfinity;
            for (std::size_t i = 0; i <= 2 * half; ++i) {
                const double z = z_ref + (static_cast<double>(i) - static_cast<double>(half) + kGridOffset) * hz;
                ++out.evaluations;
                best = std::min(best, rhs(0.0, z));
            }
            if (!(best <= y_lo + static_cast<double>(ny) * hy)) {
                throw Error(ErrorCode::NoBracket, "oracle minimum outside the value bracket", v);
            }
            found = best <= y_lo ? 0 : static_cast<std::size_t>(std::ceil((best - y_lo) / hy - 1e-9));
            while (found > 0 && y_lo + static_cast<double>(found - 1) * hy >= best - 1e-13) --found;
        } else {
            // feasibility is monotone in y, so the first feasible grid value is found by bisection
            if (!feasible(y_lo + static_cast<double>(ny) * hy)) {
                throw Error(ErrorCode::NoBracket, "oracle minimum outside the value bracket", v);
            }
            std::size_t a = 0;
            std::size_t b = ny;
            if (feasible(y_lo)) {
                b = 0;
            } else {
                while (b - a > 1) {
                    const std::size_t mid = (a + b) / 2;
                    if (feasible(y_lo + static_cast<double>(mid) * hy)) b = mid;
                    else a = mid;
                }
            }
            found = b;
        }
        out.Y[v] = y_lo + static_cast<double>(found) * hy;
    }
    out.y0 = out.Y[0];
    return out;
}

/// node,step,time,state,Y,Z_1..Z_d,min_slack,max_slack; leaves report Y_T - xi as slack.
inline void write_supersolution_csv(std::ostream& os, const Scaffold& s, const Supersolution& sol) {
    std::vector<std::string> header = {"node", "step", "time", "state", "Y"};
    for (std::size_t j = 0; j < s.dimension(); ++j) header.push_back("Z" + std::to_string(j + 1));
    header.push_back("min_slack");
    header.push_back("max_slack");
    csv::row(os, header);
    const std::size_t B = s.branching();
    const std::size_t last = s.slice_end(sol.terminal_step);
    for (std::size_t v = 0; v < last; ++v) {
        std::vector<std::string> cells = {std::to_string(v), std::to_string(s.step_of(v)),
                                          csv::number(s.grid().time(s.step_of(v))), csv::number(s.state_sum(v)),
                                          csv::number(sol.Y[v])};
        double lo = kInfinity;
        double hi = -kInfinity;
        if (s.step_of(v) < sol.terminal_step) {
            for (double z : sol.Z.at(v)) cells.push_back(csv::number(z));
            for (std::size_t sc = 0; sc < B; ++sc) {
                lo = std::min(lo, sol.slack[v * B + sc]);
                hi = std::max(hi, sol.slack[v * B + sc]);
            }
        } else {
            for (std::size_t j = 0; j < s.dimension(); ++j) cells.emplace_back();
            lo = hi = sol.terminal_gap[v - s.slice_begin(sol.terminal_step)];
        }
        cells.push_back(csv::number(lo));
        cells.push_back(csv::number(hi));
        csv::row(os, cells);
    }
}

}  // namespace supersol
