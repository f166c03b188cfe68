/**
 * @file generator.hpp
 * @brief Generators g(t, node, y, z) with declared structural flags.
 *
 * Values live in R u {+inf}; +inf (kInfinity) marks forbidden controls and
 * absorbs addition and max. Flags are declarations: falsify_flags() probes
 * them at random points and reports witnesses, but a clean report is not a
 * proof.
 */

#pragma once

#include "supersol/convex_search.hpp"
#include "supersol/error.hpp"
#include "supersol/random.hpp"
#include "supersol/scaffold.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace supersol {

using Control = std::span<const double>;
using GeneratorFn = std::function<double(std::size_t k, std::size_t node, double y, Control z)>;

struct GeneratorFlags {
    bool positive = false;
    bool increasing_y = false;
    bool decreasing_y = false;
    bool convex_z = false;
    bool lsc = false;
    bool y_independent = false;
    /// Convex in (y, z) jointly; needed by the convexity property.
    bool jointly_convex = false;
    /// Depends on the node only through its time and state; required on
    /// recombining trees.
    bool state_markov = true;
};

/// g(y, z) >= a . z + b at every (k, node).
struct LinearLowerBound {
    std::function<std::vector<double>(std::size_t k, std::size_t node)> a;
    std::function<double(std::size_t k, std::size_t node)> b;
};

struct Generator {
    std::string name;
    GeneratorFn fn;
    GeneratorFlags flags;
    std::optional<LinearLowerBound> lower_bound;
    /// Lipschitz constant in y, when known.
    std::optional<double> y_lipschitz;

    double operator()(std::size_t k, std::size_t node, double y, Control z) const {
        return fn(k, node, y, z);
    }
};

inline double evaluate(const Generator& g, std::size_t k, std::size_t node, double y, Control z) {
    if (!std::isfinite(y)) fail(ErrorCode::NonFiniteInput, "y is not finite");
    for (double v : z) {
        if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "z has a non-finite entry");
    }
    return g.fn(k, node, y, z);
}

inline double euclidean_norm(Control z) {
    double n = 0.0;
    for (double v : z) n += v * v;
    return std::sqrt(n);
}

namespace generators {

inline LinearLowerBound constant_bound(std::vector<double> a, double b) {
    return LinearLowerBound{[a](std::size_t, std::size_t) { return a; },
                            [b](std::size_t, std::size_t) { return b; }};
}

inline GeneratorFlags convex_y_free(bool positive) {
    GeneratorFlags f;
    f.positive = positive;
    f.convex_z = true;
    f.lsc = true;
    f.y_independent = true;
    f.jointly_convex = true;
    return f;
}

inline Generator zero(std::size_t d = 1) {
    Generator g;
    g.name = "zero";
    g.fn = [](std::size_t, std::size_t, double, Control) { return 0.0; };
    g.flags = convex_y_free(true);
    g.lower_bound = constant_bound(std::vector<double>(d, 0.0), 0.0);
    g.y_lipschitz = 0.0;
    return g;
}

/// a . z + b with constant a and b.
inline Generator linear(std::vector<double> a, double b) {
    Generator g;
    g.name = "linear";
    const bool a_zero = std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
    g.fn = [a, b](std::size_t, std::size_t, double, Control z) { return dot(a, z) + b; };
    g.flags = convex_y_free(a_zero && b >= 0.0);
    g.lower_bound = constant_bound(std::move(a), b);
    g.y_lipschitz = 0.0;
    return g;
}

/// lambda |z|
inline Generator abs_z(double lambda, std::size_t d = 1) {
    Generator g;
    g.name = "abs";
    g.fn = [lambda](std::size_t, std::size_t, double, Control z) { return lambda * euclidean_norm(z); };
    g.flags = convex_y_free(lambda >= 0.0);
    g.lower_bound = constant_bound(std::vector<double>(d, 0.0), 0.0);
    g.y_lipschitz = 0.0;
    return g;
}

/// lambda |z|^2
inline Generator quadratic(double lambda, std::size_t d = 1) {
    Generator g;
    g.name = "quadratic";
    g.fn = [lambda](std::size_t, std::size_t, double, Control z) {
        double n = 0.0;
        for (double v : z) n += v * v;
        return lambda * n;
    };
    g.flags = convex_y_free(lambda >= 0.0);
    g.lower_bound = constant_bound(std::vector<double>(d, 0.0), 0.0);
    g.y_lipschitz = 0.0;
    return g;
}

/**
 * Largest L-Lipschitz convex minorant of lambda |z|^2: quadratic for
 * |z| <= L / (2 lambda), affine beyond. Increases to lambda |z|^2 as L grows
 * and coincides with it on a fixed ball once L is large enough.
 */
inline Generator quadratic_capped(double lambda, double slope_cap, std::size_t d = 1) {
    Generator g;
    g.name = "quadratic_capped";
    g.fn = [lambda, slope_cap](std::size_t, std::size_t, double, Control z) {
        const double r = euclidean_norm(z);
        const double knee = slope_cap / (2.0 * lambda);
        if (r <= knee) return lambda * r * r;
        return slope_cap * r - slope_cap * slope_cap / (4.0 * lambda);
    };
    g.flags = convex_y_free(true);
    g.lower_bound = constant_bound(std::vector<double>(d, 0.0), 0.0);
    g.y_lipschitz = 0.0;
    return g;
}

/// beta * max(y, 0): positive, increasing in y, Lipschitz constant beta.
inline Generator positive_part_y(double beta, std::size_t d = 1) {
    Generator g;
    g.name = "ypos";
    g.fn = [beta](std::size_t, std::size_t, double y, Control) { return beta * std::max(y, 0.0); };
    g.flags.positive = beta >= 0.0;
    g.flags.increasing_y = true;
    g.flags.convex_z = true;
    g.flags.lsc = true;
    g.flags.jointly_convex = true;
    g.lower_bound = constant_bound(std::vector<double>(d, 0.0), 0.0);
    g.y_lipschitz = std::abs(beta);
    return g;
}

/// exp(-y): positive, decreasing in y.
inline Generator exp_neg_y(std::size_t d = 1) {
    Generator g;
    g.name = "expneg";
    g.fn = [](std::size_t, std::size_t, double y, Control) { return std::exp(-y); };
    g.flags.positive = true;
    g.flags.decreasing_y = true;
    g.flags.convex_z = true;
    g.flags.lsc = true;
    g.flags.jointly_convex = true;
    g.lower_bound = constant_bound(std::vector<double>(d, 0.0), 0.0);
    return g;
}

/// 0 on the ball |z| <= kappa, +inf outside.
inline Generator ball(double kappa, std::size_t d = 1) {
    Generator g;
    g.name = "ball";
    g.fn = [kappa](std::size_t, std::size_t, double, Control z) {
        return euclidean_norm(z) <= kappa ? 0.0 : kInfinity;
    };
    g.flags = convex_y_free(true);
    g.lower_bound = constant_bound(std::vector<double>(d, 0.0), 0.0);
    g.y_lipschitz = 0.0;
    return g;
}

/// c * g for c >= 0; flags carry over.
inline Generator scaled(const Generator& base, double c) {
    Generator g = base;
    g.name = base.name + "*" + std::to_string(c);
    auto fn = base.fn;
    g.fn = [fn, c](std::size_t k, std::size_t node, double y, Control z) {
        const double v = fn(k, node, y, z);
        return std::isinf(v) ? v : c * v;
    };
    if (base.y_lipschitz) g.y_lipschitz = c * *base.y_lipschitz;
    if (base.lower_bound) {
        auto lb = *base.lower_bound;
        g.lower_bound = LinearLowerBound{
            [lb, c](std::size_t k, std::size_t node) {
                auto a = lb.a(k, node);
                for (double& v : a) v *= c;
                return a;
            },
            [lb, c](std::size_t k, std::size_t node) { return c * lb.b(k, node); }};
    }
    return g;
}

}  // namespace generators

struct FlagViolation {
    std::string flag;
    std::string witness;
    double magnitude = 0.0;
};

struct FlagReport {
    std::size_t samples = 0;
    std::vector<FlagViolation> violations;

    bool clean() const noexcept { return violations.empty(); }
    bool violated(const std::string& flag) const {
        return std::any_of(violations.begin(), violations.end(),
                           [&](const FlagViolation& v) { return v.flag == flag; });
    }
};

struct FalsifyOptions {
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
    std::size_t dimension = 1;
    double y_range = 5.0;
    double z_range = 3.0;
    std::size_t step = 0;
    std::size_t node = 0;
};

namespace detail {

inline std::string describe_point(double y, Control z) {
    std::ostringstream os;
    os.precision(17);
    os << "y=" << y << " z=(";
    for (std::size_t j = 0; j < z.size(); ++j) os << (j ? "," : "") << z[j];
    os << ")";
    return os.str();
}

inline void record(FlagReport& report, const std::string& flag, double magnitude, std::string witness) {
    for (auto& v : report.violations) {
        if (v.flag == flag) {
            if (magnitude > v.magnitude) {
                v.magnitude = magnitude;
                v.witness = std::move(witness);
            }
            return;
        }
    }
    report.violations.push_back({flag, std::move(witness), magnitude});
}

inline double slack_tol(double a, double b) {
    return 1e-9 * (1.0 + std::abs(a) + std::abs(b));
}

}  // namespace detail

/**
 * Tries to refute each declared flag with random probes (y, z, z', lambda).
 * Returns the worst witness per violated flag.
 */
inline FlagReport falsify_flags(const Generator& g, const FalsifyOptions& opts = {}) {
    if (opts.samples == 0) fail(ErrorCode::InvalidArgument, "samples must be at least one");
    FlagReport report;
    report.samples = opts.samples;
    const auto& f = g.flags;
    if (f.increasing_y && f.decreasing_y) {
        detail::record(report, "increasing_y/decreasing_y", 1.0, "both monotonicity flags declared");
    }
    Rng rng(opts.seed);
    const std::size_t d = opts.dimension;
    std::vector<double> z(d), z2(d), zm(d), zn(d);
    auto gv = [&](double y, const std::vector<double>& zz) { return g.fn(opts.step, opts.node, y, zz); };

    for (std::size_t i = 0; i < opts.samples; ++i) {
        const double y = rng.uniform(-opts.y_range, opts.y_range);
        const double y2 = rng.uniform(-opts.y_range, opts.y_range);
        const double lam = rng.uniform();
        for (std::size_t j = 0; j < d; ++j) {
            z[j] = rng.uniform(-opts.z_range, opts.z_range);
            z2[j] = rng.uniform(-opts.z_range, opts.z_range);
        }
        // every fourth probe sits on the half-integer lattice, where kinks and jumps tend to live
        if (i % 4 == 0) {
            for (std::size_t j = 0; j < d; ++j) z[j] = 0.5 * std::round(2.0 * z[j]);
        }
        for (std::size_t j = 0; j < d; ++j) zm[j] = lam * z[j] + (1.0 - lam) * z2[j];
        const double v = gv(y, z);
        const double v_y2 = gv(y2, z);

        if (f.positive && v < -detail::slack_tol(v, 0.0)) {
            detail::record(report, "positive", -v, detail::describe_point(y, z));
        }
        const double hi_y = std::max(y, y2);
        const double lo_y = std::min(y, y2);
        const double at_hi = y >= y2 ? v : v_y2;
        const double at_lo = y >= y2 ? v_y2 : v;
        if (f.increasing_y && at_hi < at_lo - detail::slack_tol(at_hi, at_lo)) {
            detail::record(report, "increasing_y", at_lo - at_hi,
                           detail::describe_point(lo_y, z) + " vs y'=" + std::to_string(hi_y));
        }
        if (f.decreasing_y && at_hi > at_lo + detail::slack_tol(at_hi, at_lo)) {
            detail::record(report, "decreasing_y", at_hi - at_lo,
                           detail::describe_point(lo_y, z) + " vs y'=" + std::to_string(hi_y));
        }
        if (f.y_independent && !(v == v_y2) && std::abs(v - v_y2) > detail::slack_tol(v, v_y2)) {
            detail::record(report, "y_independent", std::isinf(v - v_y2) ? kInfinity : std::abs(v - v_y2),
                           detail::describe_point(y, z) + " vs y'=" + std::to_string(y2));
        }
        if (f.convex_z) {
            const double a = v;
            const double b = gv(y, z2);
            const double mid = gv(y, zm);
            if (std::isfinite(a) && std::isfinite(b)) {
                const double chord = lam * a + (1.0 - lam) * b;
                if (!(mid <= chord + detail::slack_tol(chord, 0.0))) {
                    detail::record(report, "convex_z", std::isinf(mid) ? kInfinity : mid - chord,
                                   detail::describe_point(y, zm));
                }
            }
        }
        if (f.jointly_convex) {
            const double a = v;
            const double b = gv(y2, z2);
            const double mid = gv(lam * y + (1.0 - lam) * y2, zm);
            if (std::isfinite(a) && std::isfinite(b)) {
                const double chord = lam * a + (1.0 - lam) * b;
                if (!(mid <= chord + detail::slack_tol(chord, 0.0))) {
                    detail::record(report, "jointly_convex", std::isinf(mid) ? kInfinity : mid - chord,
                                   detail::describe_point(lam * y + (1.0 - lam) * y2, zm));
                }
            }
        }
        if (f.lsc && std::isfinite(v)) {
            // a value strictly above every nearby value along a direction is a downward jump
            double nearby = -kInfinity;
            for (double delta : {1e-6, 1e-8, 1e-10}) {
                for (std::size_t j = 0; j < d; ++j) zn[j] = z[j] + delta * (z2[j] - z[j]);
                nearby = std::max(nearby, gv(y + delta * (y2 - y), zn));
            }
            if (v - nearby > 1e-6 * (1.0 + std::abs(v))) {
                detail::record(report, "lsc", v - nearby, detail::describe_point(y, z));
            }
        }
        if (g.lower_bound) {
            const auto a = g.lower_bound->a(opts.step, opts.node);
            const double bound = dot(a, z) + g.lower_bound->b(opts.step, opts.node);
            if (v < bound - detail::slack_tol(v, bound)) {
                detail::record(report, "lower_bound", bound - v, detail::describe_point(y, z));
            }
        }
    }
    return report;
}

/// Samples whether g(y, 0) = 0.
inline bool vanishes_at_zero_control(const Generator& g, std::size_t dimension, std::size_t samples = 200,
                                     std::uint64_t seed = 3, std::size_t step = 0, std::size_t node = 0) {
    Rng rng(seed);
    const std::vector<double> zero(dimension, 0.0);
    for (std::size_t i = 0; i < samples; ++i) {
        const double y = rng.uniform(-5.0, 5.0);
        if (std::abs(g.fn(step, node, y, zero)) > 1e-12) return false;
    }
    return true;
}

/**
 * sup over |z| <= R of q . z - g(y, z), by convex search. Throws
 * BoundaryActive (with the computed lower bound as payload) when the
 * maximiser sits on the sphere |z| = R.
 */
inline double conjugate_z(const Generator& g, std::size_t k, std::size_t node, double y,
                          std::span<const double> q, double radius, double tol = 1e-10) {
    if (!g.flags.convex_z) fail(ErrorCode::PreconditionUnmet, "conjugate_z needs a generator convex in z");
    if (!(radius > 0.0)) fail(ErrorCode::InvalidArgument, "radius must be positive");
    const std::size_t d = q.size();
    const std::vector<double> qv(q.begin(), q.end());
    Objective objective = [&](std::span<const double> z) {
        if (euclidean_norm(z) > radius) return kInfinity;
        const double v = g.fn(k, node, y, z);
        return std::isinf(v) ? v : v - dot(qv, z);
    };
    SearchOptions opts;
    opts.tol = tol;
    opts.initial_step = std::min(1.0, radius / 8.0);
    const SearchResult r = minimize_convex(objective, d, {std::vector<double>(d, 0.0)}, opts);
    if (!r.feasible) fail(ErrorCode::GeneratorInfeasible, "generator is +inf on the whole ball");
    const double value = -r.value;
    if (euclidean_norm(r.x) >= radius - 10.0 * tol - 1e-9 * radius) {
        throw Error(ErrorCode::BoundaryActive, "maximiser on |z| = R; value is a lower bound", std::nullopt, value);
    }
    return value;
}

}  // namespace supersol
