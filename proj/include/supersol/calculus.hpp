/**
 * @file calculus.hpp
 * @brief Operations on supersolutions: pasting, Doob decomposition and the
 *        measure change that makes linearly bounded generators positive.
 */

#pragma once

#include "supersol/csv.hpp"
#include "supersol/error.hpp"
#include "supersol/generator.hpp"
#include "supersol/scaffold.hpp"
#include "supersol/solver.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace supersol {

namespace detail {

inline void require_same_horizon(const Supersolution& a, const Supersolution& b) {
    if (a.terminal_step != b.terminal_step) fail(ErrorCode::InvalidArgument, "supersolutions have different horizons");
}

}  // namespace detail

/**
 * Pastes `first` (strictly before tau) with family[block] on and after tau.
 * `block` maps node id -> family index and is read at the nodes of the cut.
 * Requires first.Y >= family[block].Y on the cut; controls switch on the
 * edges leaving the cut.
 */
inline Supersolution paste_partition(const Scaffold& s, const Generator& g, const TerminalCondition& xi,
                                     const StoppingTime& tau, const Supersolution& first,
                                     const std::vector<Supersolution>& family, const std::vector<std::size_t>& block,
                                     double tol = 1e-12) {
    if (family.empty()) fail(ErrorCode::InvalidArgument, "pasting needs a non-empty family");
    for (const auto& member : family) detail::require_same_horizon(first, member);
    const std::size_t m = first.terminal_step;
    const std::vector<StopPhase> phase = stopping_phases(s, tau);
    if (block.size() != s.node_count()) fail(ErrorCode::InvalidArgument, "block map size mismatch");

    constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> owner(s.node_count(), unset);
    for (std::size_t v = 0; v < s.node_count(); ++v) {
        if (phase[v] != StopPhase::at || s.step_of(v) > m) continue;
        const std::size_t b = block[v];
        if (b >= family.size()) throw Error(ErrorCode::InvalidArgument, "block index outside the family", v);
        owner[v] = b;
        if (first.Y[v] < family[b].Y[v] - tol) {
            throw Error(ErrorCode::HypothesisViolated, "first supersolution lies below the pasted one on the cut", v,
                        family[b].Y[v] - first.Y[v]);
        }
    }
    for (std::size_t v = 0; v < s.slice_begin(m); ++v) {
        if (owner[v] == unset) continue;
        for (std::size_t sc = 0; sc < s.branching(); ++sc) {
            const std::size_t c = s.successor(v, sc);
            if (phase[c] != StopPhase::after) continue;
            if (owner[c] != unset && owner[c] != owner[v]) {
                throw Error(ErrorCode::PreconditionUnmet, "node reached from two blocks; use a non-recombining tree", c);
            }
            owner[c] = owner[v];
        }
    }

    AdaptedProcess Y = first.Y;
    PredictableProcess Z = first.Z;
    const std::size_t d = s.dimension();
    for (std::size_t v = 0; v < s.slice_end(m); ++v) {
        if (phase[v] == StopPhase::before) continue;
        if (owner[v] == unset) {
            if (s.step_of(v) <= m) throw Error(ErrorCode::InvalidArgument, "stopping time beyond the horizon", v);
            continue;
        }
        const Supersolution& src = family[owner[v]];
        Y[v] = src.Y[v];
        if (s.step_of(v) < m) {
            for (std::size_t j = 0; j < d; ++j) Z.at(v)[j] = src.Z.at(v)[j];
        }
    }
    return assemble(s, g, std::move(Y), std::move(Z), xi, m);
}

/**
 * Pastes s1 and s2 at the first node at or after step t where s1 exceeds s2;
 * the result equals min(s1.Y, s2.Y) on slice t. Needs a non-recombining tree
 * because the first crossing is path dependent.
 */
inline Supersolution paste_min(const Scaffold& s, const Generator& g, const TerminalCondition& xi, std::size_t t,
                               const Supersolution& s1, const Supersolution& s2) {
    detail::require_same_horizon(s1, s2);
    const std::size_t m = s1.terminal_step;
    if (t > m) fail(ErrorCode::InvalidArgument, "pasting time beyond the horizon");
    if (s.mode() != TreeMode::nonrecombining) {
        fail(ErrorCode::PreconditionUnmet, "first-crossing pasting needs a non-recombining tree");
    }
    StoppingTime tau;
    tau.stopped.assign(s.node_count(), 0);
    std::vector<std::size_t> block(s.node_count(), 0);
    std::vector<char> done(s.node_count(), 0);
    for (std::size_t v = 0; v < s.slice_end(m); ++v) {
        const std::size_t k = s.step_of(v);
        const bool parent_done = v != 0 && done[s.ancestor(v, k - 1)];
        if (parent_done) {
            done[v] = 1;
            continue;
        }
        if (k >= t && s1.Y[v] > s2.Y[v]) {
            tau.stopped[v] = 1;
            block[v] = 1;
            done[v] = 1;
        } else if (k == m) {
            tau.stopped[v] = 1;
            block[v] = 0;
            done[v] = 1;
        }
    }
    // nodes past the horizon never matter but must form a valid cut
    return paste_partition(s, g, xi, tau, s1, {s1, s2}, block);
}

/**
 * Folds paste_min over the dyadic grid t_i = i m / 2^n (m the horizon step):
 * bar_0 = family[0], bar_i = paste_min(t_i, bar_{i-1}, family[i]). The result
 * is no larger than family[i] at every grid time t_i. When `best` is given,
 * each family[i] must be within eps of it on slice t_i (HypothesisViolated
 * otherwise) and so is the result.
 */
inline Supersolution epsilon_optimal_paste(const Scaffold& s, const Generator& g, const TerminalCondition& xi,
                                           std::size_t level, const std::vector<Supersolution>& family,
                                           double eps = 0.0, const AdaptedProcess* best = nullptr) {
    if (level >= 31) fail(ErrorCode::InvalidArgument, "dyadic level too large");
    const std::size_t parts = std::size_t{1} << level;
    if (family.size() != parts + 1) fail(ErrorCode::InvalidArgument, "need one family member per grid time");
    const std::size_t m = family.front().terminal_step;
    if (m % parts != 0) fail(ErrorCode::InvalidArgument, "horizon steps must be divisible by 2^level");
    auto grid_time = [&](std::size_t i) { return i * (m / parts); };

    auto check = [&](const Supersolution& cand, std::size_t i, const char* what) {
        if (best == nullptr) return;
        const std::size_t k = grid_time(i);
        for (std::size_t v = s.slice_begin(k); v < s.slice_end(k); ++v) {
            if (cand.Y[v] > (*best)[v] + eps + 1e-12) {
                throw Error(ErrorCode::HypothesisViolated, what, v, cand.Y[v] - (*best)[v]);
            }
        }
    };
    for (std::size_t i = 0; i <= parts; ++i) check(family[i], i, "family member is not eps-optimal at its grid time");

    Supersolution bar = family.front();
    for (std::size_t i = 1; i <= parts; ++i) bar = paste_min(s, g, xi, grid_time(i), bar, family[i]);
    for (std::size_t i = 0; i <= parts; ++i) check(bar, i, "pasted supersolution is not eps-optimal");
    return bar;
}

/// Y = Y_0 + M - A with A predictable, A_0 = 0.
struct DoobDecomposition {
    AdaptedProcess M;
    AdaptedProcess A;
    /// Y_k - E[Y_{k+1} | F_k] per non-terminal node: the increment of A on the step leaving it.
    std::vector<double> increment;
};

/**
 * Doob decomposition of a supermartingale under mu. Increments are computed
 * on any tree; the path processes M and A need a non-recombining tree and are
 * left empty otherwise.
 */
inline DoobDecomposition doob_decompose(const Scaffold& s, const AdaptedProcess& Y, const Measure& mu,
                                        double tol = 1e-12) {
    if (Y.size() != s.node_count()) fail(ErrorCode::InvalidArgument, "process size mismatch");
    DoobDecomposition out;
    out.increment.resize(s.nonterminal_count());
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        const double inc = Y[v] - one_step_expectation(s, Y, v, mu);
        if (inc < -tol) throw Error(ErrorCode::NotSupermartingale, "process is not a supermartingale", v, inc);
        out.increment[v] = inc;
    }
    if (s.mode() != TreeMode::nonrecombining) return out;
    out.A = AdaptedProcess(s.node_count(), 0.0);
    out.M = AdaptedProcess(s.node_count(), 0.0);
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        for (std::size_t sc = 0; sc < s.branching(); ++sc) out.A[s.successor(v, sc)] = out.A[v] + out.increment[v];
    }
    for (std::size_t v = 0; v < s.node_count(); ++v) out.M[v] = Y[v] - Y[0] + out.A[v];
    return out;
}

/// Y_0 + M - A, the inverse of doob_decompose.
inline AdaptedProcess recompose(const AdaptedProcess& M, const AdaptedProcess& A, double y0) {
    AdaptedProcess out(M.size(), 0.0);
    for (std::size_t v = 0; v < M.size(); ++v) out[v] = y0 + M[v] - A[v];
    return out;
}

struct MeasureChange {
    PredictableProcess a;
    /// b_k per non-terminal node.
    std::vector<double> b;
    Measure p_a;
    /// Left-endpoint running sum of b dt along the path to each node.
    AdaptedProcess shift;
};

/**
 * Measure change with kernel a: edge weights 1 + a . dW. Throws
 * MeasureChangeInvalid when some edge weight is not strictly positive.
 */
inline Measure tilted_measure(const Scaffold& s, const PredictableProcess& a) {
    const std::size_t B = s.branching();
    std::vector<double> probs(s.nonterminal_count() * B);
    const double base = 1.0 / static_cast<double>(B);
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        double sum = 0.0;
        for (std::size_t sc = 0; sc < B; ++sc) {
            const double ratio = 1.0 + dot(a.at(v), s.increment(sc));
            if (!(ratio > 0.0)) {
                throw Error(ErrorCode::MeasureChangeInvalid, "edge density 1 + a.dW must be positive", v, ratio);
            }
            probs[v * B + sc] = base * ratio;
            sum += probs[v * B + sc];
        }
        // restores an exact unit sum lost to rounding
        for (std::size_t sc = 0; sc < B; ++sc) probs[v * B + sc] /= sum;
    }
    return Measure::from_transitions(s, std::move(probs));
}

/**
 * Rewrites a generator with lower bound a . z + b as the positive generator
 *
 *     gbar(y, z) = g(y - shift, z) - a . z - b
 *
 * to be solved under P_a with increments dW - a dt and terminal condition
 * xi + shift_N; the original value process is Ybar - shift with the same Z.
 */
inline std::pair<Generator, MeasureChange> girsanov_reduce(const Scaffold& s, const Generator& g) {
    if (!g.lower_bound) fail(ErrorCode::PreconditionUnmet, "generator has no linear lower bound");
    const LinearLowerBound& lb = *g.lower_bound;
    const std::size_t d = s.dimension();
    const std::size_t n_in = s.nonterminal_count();

    PredictableProcess a(n_in, d, 0.0);
    std::vector<double> b(n_in, 0.0);
    for (std::size_t v = 0; v < n_in; ++v) {
        const std::size_t k = s.step_of(v);
        const std::vector<double> av = lb.a(k, v);
        if (av.size() != d) fail(ErrorCode::InvalidArgument, "lower bound kernel has the wrong dimension");
        for (std::size_t j = 0; j < d; ++j) a.at(v)[j] = av[j];
        b[v] = lb.b(k, v);
        if (!std::isfinite(b[v])) throw Error(ErrorCode::NonFiniteInput, "lower bound drift is not finite", v);
    }
    Measure p_a = tilted_measure(s, a);

    AdaptedProcess shift(s.node_count(), std::numeric_limits<double>::quiet_NaN());
    shift[0] = 0.0;
    bool markov = true;
    for (std::size_t v = 0; v < n_in; ++v) {
        for (std::size_t sc = 0; sc < s.branching(); ++sc) {
            const std::size_t c = s.successor(v, sc);
            const double next = shift[v] + b[v] * s.dt();
            if (std::isnan(shift[c])) {
                shift[c] = next;
            } else if (std::abs(shift[c] - next) > 1e-12 * std::max(1.0, std::abs(next))) {
                markov = false;
            }
        }
    }
    if (!markov) fail(ErrorCode::PreconditionUnmet, "running drift is path dependent; use a non-recombining tree");

    Generator bar;
    bar.name = g.name + "_reduced";
    bar.flags = g.flags;
    bar.flags.positive = true;
    bar.flags.jointly_convex = g.flags.jointly_convex;
    bar.y_lipschitz = g.y_lipschitz;
    bar.lower_bound = generators::constant_bound(std::vector<double>(d, 0.0), 0.0);
    bar.fn = [fn = g.fn, a, b, shift](std::size_t k, std::size_t node, double y, Control z) {
        const double gv = fn(k, node, y - shift[node], z);
        if (std::isinf(gv)) return gv;
        return gv - dot(a.at(node), z) - b[node];
    };
    MeasureChange mc{std::move(a), std::move(b), std::move(p_a), std::move(shift)};
    return {std::move(bar), std::move(mc)};
}

struct GirsanovSolution {
    Supersolution original;
    Supersolution reduced;
    MeasureChange change;
};

/// Minimal supersolution of (g, xi) for a linearly bounded g via the reduction.
inline GirsanovSolution solve_reduced(const Scaffold& s, const Generator& g, const TerminalCondition& xi,
                                      const SolverTolerances& tol = {}) {
    auto [bar, mc] = girsanov_reduce(s, g);
    TerminalCondition shifted = xi;
    const std::size_t first_leaf = s.slice_begin(s.steps());
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += mc.shift[first_leaf + i];

    BackwardOptions opts;
    opts.tol = tol;
    opts.measure = &mc.p_a;
    opts.drift = &mc.a;
    Supersolution reduced = backward_induce(s, bar, shifted, opts);

    AdaptedProcess Y = reduced.Y;
    for (std::size_t v = 0; v < Y.size(); ++v) Y[v] -= mc.shift[v];
    Supersolution original = assemble(s, g, std::move(Y), reduced.Z, xi, reduced.terminal_step);
    return {std::move(original), std::move(reduced), std::move(mc)};
}

/// node,step,Y,M,A,A_increment
inline void write_doob_csv(std::ostream& os, const Scaffold& s, const AdaptedProcess& Y, const DoobDecomposition& dd) {
    csv::row(os, {"node", "step", "Y", "M", "A", "A_increment"});
    const bool paths = dd.A.size() == s.node_count();
    for (std::size_t v = 0; v < s.node_count(); ++v) {
        csv::row(os, {std::to_string(v), std::to_string(s.step_of(v)), csv::number(Y[v]),
                      paths ? csv::number(dd.M[v]) : std::string(), paths ? csv::number(dd.A[v]) : std::string(),
                      v < dd.increment.size() ? csv::number(dd.increment[v]) : std::string()});
    }
}

/// node,step,shift,density,b,a_1..a_d,p_1..p_B
inline void write_measure_change_csv(std::ostream& os, const Scaffold& s, const MeasureChange& mc) {
    std::vector<std::string> header = {"node", "step", "shift", "density", "b"};
    for (std::size_t j = 0; j < s.dimension(); ++j) header.push_back("a" + std::to_string(j + 1));
    for (std::size_t sc = 0; sc < s.branching(); ++sc) header.push_back("p" + std::to_string(sc + 1));
    csv::row(os, header);
    for (std::size_t v = 0; v < s.node_count(); ++v) {
        const bool inner = v < s.nonterminal_count();
        std::vector<std::string> cells = {std::to_string(v), std::to_string(s.step_of(v)), csv::number(mc.shift[v]),
                                          csv::number(mc.p_a.density(v)),
                                          inner ? csv::number(mc.b[v]) : std::string()};
        for (std::size_t j = 0; j < s.dimension(); ++j) cells.push_back(inner ? csv::number(mc.a.at(v)[j]) : "");
        for (std::size_t sc = 0; sc < s.branching(); ++sc) {
            cells.push_back(inner ? csv::number(mc.p_a.probability(v, sc)) : "");
        }
        csv::row(os, cells);
    }
}

}  // namespace supersol
