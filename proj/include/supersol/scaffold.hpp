/**
 * @file scaffold.hpp
 * @brief Finite Rademacher trees standing in for a filtered Brownian space.
 *
 * Every non-terminal node has 2^d successors. Successor s moves coordinate j
 * by +sqrt(dt) when bit j of s is clear and by -sqrt(dt) when it is set, so
 * under the uniform base measure the increments have mean zero and
 * covariance dt * I exactly.
 *
 * Nodes are numbered slice by slice: all nodes at step k come before all
 * nodes at step k + 1, and node 0 is the root. Processes are plain vectors
 * indexed by node id.
 */

#pragma once

#include "supersol/error.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace supersol {

enum class TreeMode { nonrecombining, recombining };

inline const char* to_string(TreeMode mode) {
    return mode == TreeMode::recombining ? "recombining" : "nonrecombining";
}

struct TimeGrid {
    double horizon = 1.0;
    std::size_t steps = 1;

    double dt() const { return horizon / static_cast<double>(steps); }
    double time(std::size_t k) const {
        return horizon * static_cast<double>(k) / static_cast<double>(steps);
    }
};

inline constexpr std::size_t kDefaultNodeBudget = std::size_t{1} << 20;
/// Largest d*N accepted for non-recombining trees (2^18 leaves).
inline constexpr std::size_t kMaxNonrecombiningDepth = 18;

class Scaffold {
public:
    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t steps() const noexcept { return grid_.steps; }
    double dt() const noexcept { return grid_.dt(); }
    std::size_t dimension() const noexcept { return dim_; }
    std::size_t branching() const noexcept { return branching_; }
    TreeMode mode() const noexcept { return mode_; }

    std::size_t node_count() const noexcept { return step_of_.size(); }
    /// Number of nodes with successors; non-terminal ids are [0, nonterminal_count()).
    std::size_t nonterminal_count() const noexcept { return slice_begin_[grid_.steps]; }
    std::size_t leaf_count() const noexcept { return slice_size(grid_.steps); }

    std::size_t step_of(std::size_t node) const { return step_of_[node]; }
    bool is_terminal(std::size_t node) const { return node >= nonterminal_count(); }

    std::size_t slice_begin(std::size_t k) const { return slice_begin_[k]; }
    std::size_t slice_end(std::size_t k) const { return slice_begin_[k + 1]; }
    std::size_t slice_size(std::size_t k) const { return slice_begin_[k + 1] - slice_begin_[k]; }

    std::size_t successor(std::size_t node, std::size_t s) const {
        return successors_[node * branching_ + s];
    }

    /// Brownian increment along successor s (identical at every node).
    std::span<const double> increment(std::size_t s) const {
        return {increments_.data() + s * dim_, dim_};
    }

    /// Net number of up-moves minus down-moves per coordinate.
    std::span<const int> position(std::size_t node) const {
        return {positions_.data() + node * dim_, dim_};
    }

    double brownian(std::size_t node, std::size_t j) const {
        return positions_[node * dim_ + j] * std::sqrt(dt());
    }

    /// Sum of the coordinates of W at the node.
    double state_sum(std::size_t node) const {
        double total = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) total += brownian(node, j);
        return total;
    }

    /// Ancestor at step k; defined only on non-recombining trees.
    std::size_t ancestor(std::size_t node, std::size_t k) const {
        if (mode_ != TreeMode::nonrecombining) {
            fail(ErrorCode::PreconditionUnmet, "ancestor lookup requires a non-recombining tree");
        }
        std::size_t level = step_of_[node];
        std::size_t local = node - slice_begin_[level];
        while (level > k) {
            local /= branching_;
            --level;
        }
        return slice_begin_[level] + local;
    }

    friend Scaffold build_scaffold(std::size_t, std::size_t, double, TreeMode, std::size_t);

private:
    TimeGrid grid_{};
    std::size_t dim_ = 1;
    std::size_t branching_ = 2;
    TreeMode mode_ = TreeMode::nonrecombining;
    std::vector<std::size_t> slice_begin_;
    std::vector<std::size_t> step_of_;
    std::vector<std::size_t> successors_;
    std::vector<int> positions_;
    std::vector<double> increments_;
};

/// One value per node.
struct AdaptedProcess {
    std::vector<double> values;

    AdaptedProcess() = default;
    explicit AdaptedProcess(std::size_t nodes, double fill = 0.0) : values(nodes, fill) {}
    explicit AdaptedProcess(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t node) { return values[node]; }
    double operator[](std::size_t node) const { return values[node]; }
};

/// One control vector per non-terminal node, acting on the step leaving it.
struct PredictableProcess {
    std::size_t dim = 1;
    std::vector<double> values;

    PredictableProcess() = default;
    PredictableProcess(std::size_t nonterminal, std::size_t dimension, double fill = 0.0)
        : dim(dimension), values(nonterminal * dimension, fill) {}

    std::size_t size() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
    std::span<double> at(std::size_t node) { return {values.data() + node * dim, dim}; }
    std::span<const double> at(std::size_t node) const { return {values.data() + node * dim, dim}; }
};

/// One value per leaf, in the order of the terminal slice.
struct TerminalCondition {
    std::vector<double> values;

    TerminalCondition() = default;
    explicit TerminalCondition(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t leaf) { return values[leaf]; }
    double operator[](std::size_t leaf) const { return values[leaf]; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double total = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) total += a[j] * b[j];
    return total;
}

namespace detail {

inline std::size_t checked_pow(std::size_t base, std::size_t exp, std::size_t cap) {
    std::size_t result = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (result > cap / base) return cap + 1;
        result *= base;
    }
    return result;
}

}  // namespace detail

/**
 * Builds a product Rademacher tree with d coordinates and N steps on [0, T].
 *
 * Recombining trees identify nodes by the per-coordinate up-move counts and
 * are only meaningful for payoffs and generators depending on the current
 * state alone.
 */
inline Scaffold build_scaffold(std::size_t d, std::size_t N, double T,
                               TreeMode mode = TreeMode::nonrecombining,
                               std::size_t node_budget = kDefaultNodeBudget) {
    if (d == 0 || N == 0) fail(ErrorCode::InvalidArgument, "dimension and steps must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorCode::InvalidArgument, "horizon must be positive");
    if (d > 16) fail(ErrorCode::BudgetExceeded, "dimension too large");

    const std::size_t B = std::size_t{1} << d;
    std::vector<std::size_t> sizes(N + 1);
    std::size_t total = 0;
    for (std::size_t k = 0; k <= N; ++k) {
        sizes[k] = mode == TreeMode::nonrecombining ? detail::checked_pow(B, k, node_budget)
                                                    : detail::checked_pow(k + 1, d, node_budget);
        total += sizes[k];
        if (total > node_budget) {
            fail(ErrorCode::BudgetExceeded, "node count exceeds budget of " + std::to_string(node_budget));
        }
    }
    if (mode == TreeMode::nonrecombining && d * N > kMaxNonrecombiningDepth) {
        fail(ErrorCode::BudgetExceeded, "non-recombining trees are capped at d*N <= 18");
    }

    Scaffold s;
    s.grid_ = TimeGrid{T, N};
    s.dim_ = d;
    s.branching_ = B;
    s.mode_ = mode;
    s.slice_begin_.assign(N + 2, 0);
    for (std::size_t k = 0; k <= N; ++k) s.slice_begin_[k + 1] = s.slice_begin_[k] + sizes[k];
    s.step_of_.resize(total);
    for (std::size_t k = 0; k <= N; ++k) {
        for (std::size_t v = s.slice_begin_[k]; v < s.slice_begin_[k + 1]; ++v) s.step_of_[v] = k;
    }

    const double root_dt = std::sqrt(s.dt());
    s.increments_.resize(B * d);
    for (std::size_t sc = 0; sc < B; ++sc) {
        for (std::size_t j = 0; j < d; ++j) {
            s.increments_[sc * d + j] = ((sc >> j) & 1U) ? -root_dt : root_dt;
        }
    }

    s.positions_.assign(total * d, 0);
    s.successors_.resize(s.slice_begin_[N] * B);
    if (mode == TreeMode::nonrecombining) {
        for (std::size_t k = 0; k < N; ++k) {
            for (std::size_t i = 0; i < sizes[k]; ++i) {
                const std::size_t node = s.slice_begin_[k] + i;
                for (std::size_t sc = 0; sc < B; ++sc) {
                    const std::size_t child = s.slice_begin_[k + 1] + i * B + sc;
                    s.successors_[node * B + sc] = child;
                    for (std::size_t j = 0; j < d; ++j) {
                        s.positions_[child * d + j] =
                            s.positions_[node * d + j] + (((sc >> j) & 1U) ? -1 : 1);
                    }
                }
            }
        }
    } else {
        // local index of a multi-index u (u_j in [0, k]) is sum_j u_j (k+1)^j
        std::vector<std::size_t> ups(d);
        for (std::size_t k = 0; k <= N; ++k) {
            for (std::size_t i = 0; i < sizes[k]; ++i) {
                std::size_t rest = i;
                for (std::size_t j = 0; j < d; ++j) {
                    ups[j] = rest % (k + 1);
                    rest /= (k + 1);
                }
                const std::size_t node = s.slice_begin_[k] + i;
                for (std::size_t j = 0; j < d; ++j) {
                    s.positions_[node * d + j] = 2 * static_cast<int>(ups[j]) - static_cast<int>(k);
                }
                if (k == N) continue;
                for (std::size_t sc = 0; sc < B; ++sc) {
                    std::size_t local = 0;
                    std::size_t radix = 1;
                    for (std::size_t j = 0; j < d; ++j) {
                        const std::size_t u = ups[j] + (((sc >> j) & 1U) ? 0 : 1);
                        local += u * radix;
                        radix *= (k + 2);
                    }
                    s.successors_[node * B + sc] = s.slice_begin_[k + 1] + local;
                }
            }
        }
    }
    return s;
}

/**
 * Transition probabilities per non-terminal node, together with the node
 * marginals and the density (likelihood ratio of marginals) against the
 * uniform base measure.
 */
class Measure {
public:
    static Measure base(const Scaffold& s) {
        std::vector<double> probs(s.nonterminal_count() * s.branching(),
                                  1.0 / static_cast<double>(s.branching()));
        return Measure(s, std::move(probs));
    }

    static Measure from_transitions(const Scaffold& s, std::vector<double> probs) {
        const std::size_t B = s.branching();
        if (probs.size() != s.nonterminal_count() * B) {
            fail(ErrorCode::InvalidArgument, "transition table has the wrong size");
        }
        for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
            double sum = 0.0;
            for (std::size_t sc = 0; sc < B; ++sc) {
                const double p = probs[v * B + sc];
                if (!(p > 0.0) || !std::isfinite(p)) {
                    throw Error(ErrorCode::InvalidArgument, "transition probability must be positive", v);
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12) {
                throw Error(ErrorCode::InvalidArgument, "transition probabilities must sum to one", v);
            }
        }
        return Measure(s, std::move(probs));
    }

    std::size_t branching() const noexcept { return branching_; }
    double probability(std::size_t node, std::size_t s) const { return probs_[node * branching_ + s]; }
    std::span<const double> transitions(std::size_t node) const {
        return {probs_.data() + node * branching_, branching_};
    }
    double marginal(std::size_t node) const { return marginal_[node]; }
    double density(std::size_t node) const { return density_[node]; }
    const std::vector<double>& densities() const noexcept { return density_; }

private:
    Measure(const Scaffold& s, std::vector<double> probs)
        : branching_(s.branching()), probs_(std::move(probs)) {
        const std::size_t n = s.node_count();
        marginal_.assign(n, 0.0);
        std::vector<double> base(n, 0.0);
        marginal_[0] = 1.0;
        base[0] = 1.0;
        const double uniform = 1.0 / static_cast<double>(branching_);
        for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
            for (std::size_t sc = 0; sc < branching_; ++sc) {
                const std::size_t c = s.successor(v, sc);
                marginal_[c] += marginal_[v] * probs_[v * branching_ + sc];
                base[c] += base[v] * uniform;
            }
        }
        density_.resize(n);
        for (std::size_t v = 0; v < n; ++v) density_[v] = marginal_[v] / base[v];
    }

    std::size_t branching_;
    std::vector<double> probs_;
    std::vector<double> marginal_;
    std::vector<double> density_;
};

/// E_mu[x at the successors | node].
inline double one_step_expectation(const Scaffold& s, const AdaptedProcess& x, std::size_t node,
                                   const Measure& mu) {
    double total = 0.0;
    for (std::size_t sc = 0; sc < s.branching(); ++sc) {
        total += mu.probability(node, sc) * x[s.successor(node, sc)];
    }
    return total;
}

/**
 * E_mu[x_from | F_to], one entry per node of slice `to` (in slice order).
 */
inline std::vector<double> conditional_expectation(const Scaffold& s, const AdaptedProcess& x,
                                                   std::size_t from, std::size_t to,
                                                   const Measure& mu) {
    if (to > from || from > s.steps()) fail(ErrorCode::InvalidArgument, "need to <= from <= N");
    AdaptedProcess work(s.node_count(), 0.0);
    for (std::size_t v = s.slice_begin(from); v < s.slice_end(from); ++v) work[v] = x[v];
    for (std::size_t k = from; k-- > to;) {
        for (std::size_t v = s.slice_begin(k); v < s.slice_end(k); ++v) {
            work[v] = one_step_expectation(s, work, v, mu);
        }
    }
    return {work.values.begin() + static_cast<std::ptrdiff_t>(s.slice_begin(to)),
            work.values.begin() + static_cast<std::ptrdiff_t>(s.slice_end(to))};
}

/// Martingale E_mu[xi | F_k] on every node.
inline AdaptedProcess martingale_from_terminal(const Scaffold& s, const TerminalCondition& xi,
                                               const Measure& mu) {
    if (xi.size() != s.leaf_count()) fail(ErrorCode::InvalidArgument, "terminal condition size mismatch");
    AdaptedProcess m(s.node_count(), 0.0);
    const std::size_t first_leaf = s.slice_begin(s.steps());
    for (std::size_t i = 0; i < xi.size(); ++i) m[first_leaf + i] = xi[i];
    for (std::size_t v = s.nonterminal_count(); v-- > 0;) m[v] = one_step_expectation(s, m, v, mu);
    return m;
}

/// Process whose terminal slice carries xi; earlier nodes are zero.
inline AdaptedProcess embed_terminal(const Scaffold& s, const TerminalCondition& xi) {
    AdaptedProcess x(s.node_count(), 0.0);
    const std::size_t first_leaf = s.slice_begin(s.steps());
    for (std::size_t i = 0; i < xi.size(); ++i) x[first_leaf + i] = xi[i];
    return x;
}

/**
 * Path sums of Z . dW. `drift`, when given, replaces dW by dW - a dt on the
 * step leaving each node. Requires a non-recombining tree: on recombining
 * trees the integral is not a function of the node.
 */
inline AdaptedProcess stochastic_integral(const Scaffold& s, const PredictableProcess& Z,
                                          const PredictableProcess* drift = nullptr) {
    if (s.mode() != TreeMode::nonrecombining) {
        fail(ErrorCode::PreconditionUnmet, "stochastic integral needs a non-recombining tree");
    }
    AdaptedProcess out(s.node_count(), 0.0);
    const double dt = s.dt();
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        const auto z = Z.at(v);
        for (std::size_t sc = 0; sc < s.branching(); ++sc) {
            double inc = dot(z, s.increment(sc));
            if (drift != nullptr) inc -= dot(z, drift->at(v)) * dt;
            out[s.successor(v, sc)] = out[v] + inc;
        }
    }
    return out;
}

struct SupermartingaleCheck {
    bool holds = true;
    /// max over nodes of E[x_{k+1} | F_k] - x_k; positive values violate.
    double worst_violation = 0.0;
    std::size_t worst_node = 0;
};

inline SupermartingaleCheck is_supermartingale(const Scaffold& s, const AdaptedProcess& x,
                                               const Measure& mu, double tol) {
    SupermartingaleCheck out;
    bool first = true;
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        const double excess = one_step_expectation(s, x, v, mu) - x[v];
        if (first || excess > out.worst_violation) {
            out.worst_violation = excess;
            out.worst_node = v;
            first = false;
        }
    }
    out.holds = out.worst_violation <= tol;
    return out;
}

/**
 * Supermartingale check for the integral of Z expressed through its one-step
 * increments, which also works on recombining trees.
 */
inline SupermartingaleCheck integral_is_supermartingale(const Scaffold& s, const PredictableProcess& Z,
                                                        const Measure& mu, double tol,
                                                        const PredictableProcess* drift = nullptr) {
    SupermartingaleCheck out;
    bool first = true;
    const double dt = s.dt();
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        const auto z = Z.at(v);
        double mean = 0.0;
        for (std::size_t sc = 0; sc < s.branching(); ++sc) {
            double inc = dot(z, s.increment(sc));
            if (drift != nullptr) inc -= dot(z, drift->at(v)) * dt;
            mean += mu.probability(v, sc) * inc;
        }
        if (first || mean > out.worst_violation) {
            out.worst_violation = mean;
            out.worst_node = v;
            first = false;
        }
    }
    out.holds = out.worst_violation <= tol;
    return out;
}

/**
 * Per-node stopping flags. A valid stopping time flags exactly one node on
 * every root-to-leaf path.
 */
struct StoppingTime {
    std::vector<char> stopped;

    static StoppingTime at_step(const Scaffold& s, std::size_t k) {
        if (k > s.steps()) fail(ErrorCode::InvalidArgument, "stopping step beyond horizon");
        StoppingTime tau;
        tau.stopped.assign(s.node_count(), 0);
        for (std::size_t v = s.slice_begin(k); v < s.slice_end(k); ++v) tau.stopped[v] = 1;
        return tau;
    }

    bool at(std::size_t node) const { return stopped[node] != 0; }
};

enum class StopPhase : char { unset = 0, before = 1, at = 2, after = 3 };

/**
 * Labels every node as strictly before, at, or strictly after the stopping
 * time; throws InvalidArgument if the flags do not form a cut.
 */
inline std::vector<StopPhase> stopping_phases(const Scaffold& s, const StoppingTime& tau) {
    if (tau.stopped.size() != s.node_count()) fail(ErrorCode::InvalidArgument, "stopping time size mismatch");
    std::vector<StopPhase> phase(s.node_count(), StopPhase::unset);
    phase[0] = tau.at(0) ? StopPhase::at : StopPhase::before;
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        for (std::size_t sc = 0; sc < s.branching(); ++sc) {
            const std::size_t c = s.successor(v, sc);
            StopPhase want;
            if (phase[v] == StopPhase::before) {
                want = tau.at(c) ? StopPhase::at : StopPhase::before;
            } else {
                if (tau.at(c)) throw Error(ErrorCode::InvalidArgument, "path stopped twice", c);
                want = StopPhase::after;
            }
            if (phase[c] != StopPhase::unset && phase[c] != want) {
                throw Error(ErrorCode::InvalidArgument, "stopping flags are not adapted to the tree", c);
            }
            phase[c] = want;
        }
    }
    for (std::size_t v = s.slice_begin(s.steps()); v < s.slice_end(s.steps()); ++v) {
        if (phase[v] == StopPhase::before) throw Error(ErrorCode::InvalidArgument, "path never stopped", v);
    }
    return phase;
}

/// Structured text description: grid, dimension and mode.
inline std::string describe(const Scaffold& s) {
    std::ostringstream os;
    os.precision(17);
    os << "scaffold\n"
       << "horizon = " << s.grid().horizon << "\n"
       << "steps = " << s.steps() << "\n"
       << "dimension = " << s.dimension() << "\n"
       << "mode = " << to_string(s.mode()) << "\n";
    return os.str();
}

inline Scaffold parse_scaffold(const std::string& text, std::size_t node_budget = kDefaultNodeBudget) {
    std::istringstream is(text);
    std::string line;
    double horizon = 0.0;
    std::size_t steps = 0;
    std::size_t dimension = 0;
    TreeMode mode = TreeMode::nonrecombining;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line == "scaffold") {
            header = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorCode::InvalidArgument, "malformed line: " + line);
        auto trim = [](std::string v) {
            const auto b = v.find_first_not_of(" \t");
            const auto e = v.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto number = [&](auto convert) {
            try {
                std::size_t used = 0;
                const auto v = convert(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::logic_error&) {
                fail(ErrorCode::InvalidArgument, "malformed value for " + key + ": " + value);
            }
        };
        if (key == "horizon") horizon = number([](const std::string& v, std::size_t* u) { return std::stod(v, u); });
        else if (key == "steps") steps = number([](const std::string& v, std::size_t* u) { return std::stoul(v, u); });
        else if (key == "dimension") dimension = number([](const std::string& v, std::size_t* u) { return std::stoul(v, u); });
        else if (key == "mode") {
            if (value == "recombining") mode = TreeMode::recombining;
            else if (value == "nonrecombining") mode = TreeMode::nonrecombining;
            else fail(ErrorCode::InvalidArgument, "unknown mode: " + value);
        } else {
            fail(ErrorCode::InvalidArgument, "unknown key: " + key);
        }
    }
    if (!header) fail(ErrorCode::InvalidArgument, "missing scaffold header");
    return build_scaffold(dimension, steps, horizon, mode, node_budget);
}

}  // namespace supersol
