/**
 * @file convex_search.hpp
 * @brief Derivative-free minimisation of convex, possibly extended-valued
 *        functions on R^d.
 *
 * One coordinate is searched by golden section on an adaptively expanded
 * bracket. Higher dimensions nest the search: coordinate j minimises the
 * partial minimum over coordinates j+1..d-1, which is again convex, so the
 * nested search stays correct for nonsmooth objectives where cyclic
 * coordinate descent can stall on a kink.
 */

#pragma once

#include "supersol/error.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace supersol {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SearchOptions {
    /// Bracket width at which a golden-section search stops.
    double tol = 1e-8;
    double initial_step = 0.5;
    int max_expansions = 200;
    int max_iterations = 400;
};

struct SearchResult {
    std::vector<double> x;
    double value = kInfinity;
    bool feasible = false;
    std::size_t evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

inline double squared_norm(const std::vector<double>& x) {
    double n = 0.0;
    for (double v : x) n += v * v;
    return n;
}

/// Smaller value wins; within `tie` of each other the smaller norm wins.
inline bool better(double fa, const std::vector<double>& xa, double fb, const std::vector<double>& xb) {
    if (!std::isfinite(fb)) return std::isfinite(fa) || squared_norm(xa) < squared_norm(xb);
    if (!std::isfinite(fa)) return false;
    const double tie = 1e-14 * std::max(1.0, std::abs(fb));
    if (fa < fb - tie) return true;
    if (fa > fb + tie) return false;
    return squared_norm(xa) < squared_norm(xb);
}

class NestedSearch {
public:
    NestedSearch(const Objective& f, std::size_t dim, const SearchOptions& opts)
        : f_(f), dim_(dim), opts_(opts) {}

    SearchResult run(std::vector<double> start) {
        SearchResult r = coordinate(start, 0);
        r.evaluations = evaluations_;
        return r;
    }

    std::size_t evaluations() const noexcept { return evaluations_; }

    double evaluate(std::span<const double> x) {
        ++evaluations_;
        return f_(x);
    }

private:
    struct Point {
        double t;
        double value;
        std::vector<double> x;
    };

    SearchResult coordinate(std::vector<double>& x, std::size_t j) {
        SearchResult out;
        if (j == dim_) {
            out.value = evaluate(x);
            out.x = x;
            out.feasible = std::isfinite(out.value);
            return out;
        }

        std::vector<Point> probes;
        // inner coordinates warm-start from the last feasible probe; an
        // infeasible probe must not drag them off into the void
        std::vector<double> warm = x;
        auto phi = [&](double t) -> double {
            x = warm;
            x[j] = t;
            SearchResult inner = coordinate(x, j + 1);
            probes.push_back({t, inner.value, inner.x});
            if (inner.feasible) warm = inner.x;
            return inner.value;
        };

        const double h = opts_.initial_step;
        double x0 = x[j];
        double f0 = phi(x0);
        if (!std::isfinite(f0)) {
            bool found = false;
            double step = h;
            for (int i = 0; i < 64 && !found; ++i, step *= 2.0) {
                for (double sign : {1.0, -1.0}) {
                    const double t = x0 + sign * step;
                    const double ft = phi(t);
                    if (std::isfinite(ft)) {
                        x0 = t;
                        f0 = ft;
                        found = true;
                        break;
                    }
                }
            }
            if (!found) {
                out.x = x;
                out.value = kInfinity;
                out.feasible = false;
                return out;
            }
        }

        // bracket (lo, b, hi) with f(b) <= f(lo), f(hi)
        double lo, b, hi, fb;
        const double fr = phi(x0 + h);
        if (fr < f0) {
            lo = x0;
            b = x0 + h;
            fb = fr;
            hi = expand(phi, lo, b, fb, +1.0);
        } else {
            const double fl = phi(x0 - h);
            if (fl < f0) {
                hi = x0;
                b = x0 - h;
                fb = fl;
                lo = expand(phi, hi, b, fb, -1.0);
            } else {
                lo = x0 - h;
                b = x0;
                hi = x0 + h;
                fb = f0;
            }
        }

        constexpr double kGolden = 0.3819660112501051;
        for (int it = 0; it < opts_.max_iterations; ++it) {
            const double width = hi - lo;
            if (width <= opts_.tol || width <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(b)) break;
            const bool right = (hi - b) > (b - lo);
            const double t = right ? b + kGolden * (hi - b) : b - kGolden * (b - lo);
            const double ft = phi(t);
            if (ft < fb) {
                if (t > b) lo = b;
                else hi = b;
                b = t;
                fb = ft;
            } else {
                if (t > b) hi = t;
                else lo = t;
            }
        }

        const Point* best = &probes.front();
        for (const Point& p : probes) {
            if (better(p.value, p.x, best->value, best->x)) best = &p;
        }
        out.x = best->x;
        out.value = best->value;
        out.feasible = std::isfinite(best->value);
        x = best->x;
        return out;
    }

    // Walks from b away from `anchor` with doubling steps until the value rises.
    template <class Phi>
    double expand(Phi& phi, double& anchor, double& b, double& fb, double dir) {
        double step = std::abs(b - anchor);
        for (int i = 0; i < opts_.max_expansions; ++i) {
            step *= 2.0;
            const double c = b + dir * step;
            const double fc = phi(c);
            if (!(fc < fb)) return c;
            anchor = b;
            b = c;
            fb = fc;
        }
        fail(ErrorCode::NoBracket, "convex search could not bracket a minimiser");
    }

    const Objective& f_;
    std::size_t dim_;
    SearchOptions opts_;
    std::size_t evaluations_ = 0;
};

}  // namespace detail

/**
 * Minimises a convex function over R^dim starting from the best of `seeds`.
 * Every seed is evaluated and takes part in the final comparison, so a seed
 * that is already an exact minimiser (e.g. a kink of a piecewise linear part)
 * is returned as is. Ties go to the smallest Euclidean norm.
 */
inline SearchResult minimize_convex(const Objective& f, std::size_t dim,
                                    const std::vector<std::vector<double>>& seeds,
                                    const SearchOptions& opts = {}) {
    detail::NestedSearch search(f, dim, opts);
    std::vector<double> best_x(dim, 0.0);
    double best_f = kInfinity;
    bool have = false;
    for (const auto& seed : seeds) {
        const double v = search.evaluate(seed);
        if (!have || detail::better(v, seed, best_f, best_x)) {
            best_x = seed;
            best_f = v;
            have = true;
        }
    }
    if (!have) {
        best_f = search.evaluate(best_x);
    }
    const std::vector<double> seed_x = best_x;
    const double seed_f = best_f;
    SearchResult r = search.run(best_x);
    if (detail::better(seed_f, seed_x, r.value, r.x)) {
        r.x = seed_x;
        r.value = seed_f;
        r.feasible = std::isfinite(seed_f);
    }
    r.evaluations = search.evaluations();
    return r;
}

}  // namespace supersol
