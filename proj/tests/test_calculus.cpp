#include "supersol/calculus.hpp"
#include "supersol/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace supersol;

namespace {

TerminalCondition random_payoff(const Scaffold& s, std::uint64_t seed) {
    Rng rng(seed);
    TerminalCondition xi;
    for (std::size_t i = 0; i < s.leaf_count(); ++i) xi.values.push_back(rng.uniform(-2.0, 2.0));
    return xi;
}

Supersolution shifted(const Scaffold& s, const Generator& g, const TerminalCondition& xi, const Supersolution& base,
                      double c) {
    AdaptedProcess Y = base.Y;
    for (double& v : Y.values) v += c;
    return assemble(s, g, std::move(Y), base.Z, xi, base.terminal_step);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ConfigError;
}

}  // namespace

TEST(PastePartition, IdentityFamily) {
    const Scaffold s = build_scaffold(1, 4, 1.0);
    const Generator g = generators::abs_z(0.5);
    const TerminalCondition xi = random_payoff(s, 1);
    const Supersolution first = backward_induce(s, g, xi);
    for (std::size_t k = 0; k <= 4; ++k) {
        const Supersolution out = paste_partition(s, g, xi, StoppingTime::at_step(s, k), first, {first},
                                                  std::vector<std::size_t>(s.node_count(), 0));
        EXPECT_EQ(out.Y.values, first.Y.values);
        EXPECT_EQ(out.Z.values, first.Z.values);
    }
}

TEST(PastePartition, DropsToMartingaleAfterCut) {
    const Scaffold s = build_scaffold(1, 3, 1.0);
    const Generator g = generators::zero();
    const TerminalCondition xi = random_payoff(s, 2);
    const Supersolution exact = backward_induce(s, g, xi);
    const Supersolution high = shifted(s, g, xi, exact, 0.2);
    const Supersolution out = paste_partition(s, g, xi, StoppingTime::at_step(s, 1), high, {exact},
                                              std::vector<std::size_t>(s.node_count(), 0));
    EXPECT_NEAR(out.Y[0], exact.Y[0] + 0.2, 1e-15);
    for (std::size_t v = s.slice_begin(1); v < s.node_count(); ++v) EXPECT_EQ(out.Y[v], exact.Y[v]);
    const VerifyReport r = verify_supersolution(s, g, out, xi);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.worst_slack, 0.0, 1e-12);
}

TEST(PastePartition, HypothesisViolatedWhenRolesSwap) {
    const Scaffold s = build_scaffold(1, 3, 1.0);
    const Generator g = generators::zero();
    const TerminalCondition xi = random_payoff(s, 2);
    const Supersolution exact = backward_induce(s, g, xi);
    const Supersolution high = shifted(s, g, xi, exact, 0.2);
    try {
        paste_partition(s, g, xi, StoppingTime::at_step(s, 1), exact, {high},
                        std::vector<std::size_t>(s.node_count(), 0));
        FAIL() << "expected HypothesisViolated";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::HypothesisViolated);
        ASSERT_TRUE(e.node().has_value());
        EXPECT_EQ(s.step_of(*e.node()), 1u);
    }
}

TEST(PastePartition, BlocksSelectFamilyMembers) {
    const Scaffold s = build_scaffold(1, 3, 1.0);
    const Generator g = generators::quadratic(1.0);
    const TerminalCondition xi = random_payoff(s, 4);
    const Supersolution exact = backward_induce(s, g, xi);
    const Supersolution mid = shifted(s, g, xi, exact, 0.1);
    const Supersolution top = shifted(s, g, xi, exact, 0.3);
    std::vector<std::size_t> block(s.node_count(), 0);
    block[s.slice_begin(1) + 1] = 1;
    const Supersolution out =
        paste_partition(s, g, xi, StoppingTime::at_step(s, 1), top, {exact, mid}, block);
    EXPECT_EQ(out.Y[s.slice_begin(1)], exact.Y[s.slice_begin(1)]);
    EXPECT_EQ(out.Y[s.slice_begin(1) + 1], mid.Y[s.slice_begin(1) + 1]);
    EXPECT_EQ(out.Y[s.node_count() - 1], mid.Y[s.node_count() - 1]);
    EXPECT_TRUE(verify_supersolution(s, g, out, xi).pass);

    block[s.slice_begin(1)] = 7;
    EXPECT_EQ(code_of([&] { paste_partition(s, g, xi, StoppingTime::at_step(s, 1), top, {exact, mid}, block); }),
              ErrorCode::InvalidArgument);
}

TEST(PasteMin, Examples) {
    const Scaffold s = build_scaffold(1, 4, 1.0);
    const Generator g = generators::abs_z(0.5);
    const TerminalCondition xi = random_payoff(s, 5);
    const Supersolution exact = backward_induce(s, g, xi);

    const Supersolution same = paste_min(s, g, xi, 2, exact, exact);
    EXPECT_EQ(same.Y.values, exact.Y.values);

    const Supersolution a = shifted(s, g, xi, exact, 0.3);
    const Supersolution b = shifted(s, g, xi, exact, 0.1);
    const Supersolution m = paste_min(s, g, xi, 2, a, b);
    for (std::size_t v = s.slice_begin(2); v < s.slice_end(2); ++v) EXPECT_NEAR(m.Y[v], b.Y[v], 1e-15);
    EXPECT_NEAR(m.Y[0], a.Y[0], 1e-15);
    EXPECT_TRUE(verify_supersolution(s, g, m, xi).pass);

    const Supersolution m2 = paste_min(s, g, xi, 2, exact, a);
    for (std::size_t v = 0; v < s.node_count(); ++v) EXPECT_EQ(m2.Y[v], exact.Y[v]);

    EXPECT_THROW(paste_min(build_scaffold(1, 4, 1.0, TreeMode::recombining), g, TerminalCondition({0, 0, 0, 0, 0}), 1,
                           exact, exact),
                 Error);
}

TEST(PasteMin, NodewiseMinimumOfCrossingSupersolutions) {
    const Scaffold s = build_scaffold(1, 4, 1.0);
    const Generator g = generators::abs_z(0.5);
    const TerminalCondition xi = random_payoff(s, 6);
    // supersolutions of (g, xi) from a larger generator and larger terminal values
    const Supersolution p = backward_induce(s, generators::abs_z(1.5), xi);
    TerminalCondition bumped = xi;
    for (std::size_t i = 0; i < bumped.size(); ++i) bumped[i] += (i % 3 == 0) ? 0.8 : 0.0;
    const Supersolution q = backward_induce(s, g, bumped);
    const Supersolution pp = assemble(s, g, p.Y, p.Z, xi, 4);
    const Supersolution qq = assemble(s, g, q.Y, q.Z, xi, 4);
    ASSERT_TRUE(verify_supersolution(s, g, pp, xi).pass);
    ASSERT_TRUE(verify_supersolution(s, g, qq, xi).pass);
    for (std::size_t t = 0; t <= 4; ++t) {
        const Supersolution m = paste_min(s, g, xi, t, pp, qq);
        for (std::size_t v = s.slice_begin(t); v < s.slice_end(t); ++v) {
            EXPECT_EQ(m.Y[v], std::min(pp.Y[v], qq.Y[v]));
        }
        EXPECT_GE(verify_supersolution(s, g, m, xi).worst_slack, -1e-9);
    }
}

TEST(EpsilonOptimalPaste, Examples) {
    const Scaffold s = build_scaffold(1, 4, 1.0);
    const Generator g = generators::zero();
    const TerminalCondition xi = random_payoff(s, 7);
    const Supersolution exact = backward_induce(s, g, xi);

    const Supersolution same = epsilon_optimal_paste(s, g, xi, 1, {exact, exact, exact});
    EXPECT_EQ(same.Y.values, exact.Y.values);

    const Supersolution zero_eps = epsilon_optimal_paste(s, g, xi, 2, std::vector<Supersolution>(5, exact), 0.0, &exact.Y);
    for (std::size_t v = 0; v < s.node_count(); ++v) EXPECT_EQ(zero_eps.Y[v], exact.Y[v]);

    // two members, each better on one half of the grid
    const Supersolution high = shifted(s, g, xi, exact, 0.5);
    const Supersolution low_early = shifted(s, g, xi, exact, 0.1);
    const std::vector<Supersolution> family = {low_early, low_early, high};
    const Supersolution out = epsilon_optimal_paste(s, g, xi, 1, family);
    for (std::size_t i = 0; i <= 2; ++i) {
        const std::size_t k = i * 2;
        for (std::size_t v = s.slice_begin(k); v < s.slice_end(k); ++v) {
            EXPECT_LE(out.Y[v], family[i].Y[v] + 1e-12);
        }
    }
    EXPECT_TRUE(verify_supersolution(s, g, out, xi).pass);

    EXPECT_EQ(code_of([&] { epsilon_optimal_paste(s, g, xi, 1, family, 0.05, &exact.Y); }),
              ErrorCode::HypothesisViolated);
    EXPECT_EQ(code_of([&] { epsilon_optimal_paste(s, g, xi, 3, family); }), ErrorCode::InvalidArgument);
}

TEST(Doob, MartingaleHasNoDrift) {
    const Scaffold s = build_scaffold(1, 3, 1.0);
    const Measure mu = Measure::base(s);
    const AdaptedProcess m = martingale_from_terminal(s, random_payoff(s, 8), mu);
    const DoobDecomposition dd = doob_decompose(s, m, mu);
    for (std::size_t v = 0; v < s.node_count(); ++v) {
        EXPECT_NEAR(dd.A[v], 0.0, 1e-15);
        EXPECT_NEAR(dd.M[v], m[v] - m[0], 1e-15);
    }
}

TEST(Doob, DeterministicDecrease) {
    const Scaffold s = build_scaffold(1, 3, 1.0);
    AdaptedProcess y(s.node_count());
    for (std::size_t v = 0; v < s.node_count(); ++v) y[v] = -static_cast<double>(s.step_of(v)) * s.dt();
    const DoobDecomposition dd = doob_decompose(s, y, Measure::base(s));
    for (std::size_t v = 0; v < s.node_count(); ++v) {
        EXPECT_NEAR(dd.A[v], static_cast<double>(s.step_of(v)) * s.dt(), 1e-15);
        EXPECT_NEAR(dd.M[v], 0.0, 1e-15);
    }
}

TEST(Doob, ReconcilesWithSolverOutput) {
    const Scaffold s = build_scaffold(1, 5, 1.0);
    const Generator g = generators::abs_z(0.5);
    const TerminalCondition xi = random_payoff(s, 9);
    const Supersolution sol = backward_induce(s, g, xi);
    const Measure mu = Measure::base(s);
    const DoobDecomposition dd = doob_decompose(s, sol.Y, mu);
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        double mean_slack = 0.0;
        for (std::size_t sc = 0; sc < 2; ++sc) mean_slack += 0.5 * sol.slack[v * 2 + sc];
        EXPECT_NEAR(dd.increment[v], g.fn(0, v, sol.Y[v], sol.Z.at(v)) * s.dt() + mean_slack, 1e-9);
        EXPECT_GE(dd.increment[v], -1e-12);
    }
    const AdaptedProcess back = recompose(dd.M, dd.A, sol.Y[0]);
    for (std::size_t v = 0; v < s.node_count(); ++v) EXPECT_NEAR(back[v], sol.Y[v], 1e-12);
    EXPECT_LE(is_supermartingale(s, dd.M, mu, 1e-12).worst_violation, 1e-12);
    AdaptedProcess neg = dd.M;
    for (double& v : neg.values) v = -v;
    EXPECT_LE(is_supermartingale(s, neg, mu, 1e-12).worst_violation, 1e-12);
}

TEST(Doob, RejectsSubmartingales) {
    const Scaffold s = build_scaffold(1, 2, 1.0);
    AdaptedProcess y(s.node_count());
    for (std::size_t v = 0; v < s.node_count(); ++v) y[v] = static_cast<double>(s.step_of(v));
    EXPECT_EQ(code_of([&] { doob_decompose(s, y, Measure::base(s)); }), ErrorCode::NotSupermartingale);
    const DoobDecomposition rec = doob_decompose(build_scaffold(1, 3, 1.0, TreeMode::recombining),
                                                 AdaptedProcess(10, 1.0),
                                                 Measure::base(build_scaffold(1, 3, 1.0, TreeMode::recombining)));
    EXPECT_EQ(rec.increment.size(), 6u);
    EXPECT_TRUE(rec.A.values.empty());
}

TEST(Girsanov, IdentityWithoutKernel) {
    const Scaffold s = build_scaffold(1, 3, 1.0);
    const Generator g = generators::abs_z(1.0);
    const auto [bar, mc] = girsanov_reduce(s, g);
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        EXPECT_DOUBLE_EQ(mc.p_a.probability(v, 0), 0.5);
        EXPECT_DOUBLE_EQ(mc.p_a.probability(v, 1), 0.5);
    }
    for (double sh : mc.shift.values) EXPECT_EQ(sh, 0.0);
    const std::vector<double> z = {0.7};
    EXPECT_DOUBLE_EQ(bar.fn(0, 0, 1.0, z), g.fn(0, 0, 1.0, z));
}

TEST(Girsanov, TiltedProbabilities) {
    const Scaffold s = build_scaffold(1, 4, 1.0);
    const auto [bar, mc] = girsanov_reduce(s, generators::linear({0.5}, 0.0));
    EXPECT_DOUBLE_EQ(mc.p_a.probability(0, 0), 0.625);
    EXPECT_DOUBLE_EQ(mc.p_a.probability(0, 1), 0.375);
    // drift identity: E_{P_a}[dW] = a dt
    for (std::size_t v = 0; v < s.nonterminal_count(); ++v) {
        double mean = 0.0;
        for (std::size_t sc = 0; sc < 2; ++sc) mean += mc.p_a.probability(v, sc) * s.increment(sc)[0];
        EXPECT_NEAR(mean, 0.5 * s.dt(), 1e-15);
    }
    EXPECT_TRUE(falsify_flags(bar).clean());
}

TEST(Girsanov, RejectsDegenerateKernel) {
    const Scaffold s = build_scaffold(1, 4, 1.0);
    EXPECT_EQ(code_of([&] { girsanov_reduce(s, generators::linear({2.0}, 0.0)); }), ErrorCode::MeasureChangeInvalid);
    EXPECT_EQ(code_of([&] { girsanov_reduce(s, generators::linear({3.0}, 0.0)); }), ErrorCode::MeasureChangeInvalid);
    Generator no_bound = generators::zero();
    no_bound.lower_bound.reset();
    EXPECT_EQ(code_of([&] { girsanov_reduce(s, no_bound); }), ErrorCode::PreconditionUnmet);
}

TEST(Girsanov, LinearRoundTrip) {
    const Scaffold s = build_scaffold(1, 6, 1.5);
    const Generator g = generators::linear({0.5}, 0.1);
    const TerminalCondition xi = random_payoff(s, 10);
    const GirsanovSolution sol = solve_reduced(s, g, xi);
    const double q = 0.5 * (1.0 + 0.5 * std::sqrt(s.dt()));
    // E_{P_a}[xi] by explicit path weights
    double expect = 0.0;
    for (std::size_t i = 0; i < s.leaf_count(); ++i) {
        const std::size_t leaf = s.slice_begin(s.steps()) + i;
        const int pos = s.position(leaf)[0];
        const int ups = (static_cast<int>(s.steps()) + pos) / 2;
        expect += std::pow(q, ups) * std::pow(1.0 - q, static_cast<int>(s.steps()) - ups) * xi[i];
    }
    EXPECT_NEAR(sol.original.Y[0], expect + 0.1 * 1.5, 1e-9);
    const VerifyReport r = verify_supersolution(s, g, sol.original, xi);
    EXPECT_TRUE(r.pass) << r.worst_slack;
    for (const Successor& unused : std::vector<Successor>{}) (void)unused;
    // reduced generator vanishes identically
    const std::vector<double> z = {1.3};
    EXPECT_NEAR(girsanov_reduce(s, g).first.fn(2, 5, 0.4, z), 0.0, 1e-15);
}

TEST(Girsanov, ReducedSolveMatchesDirectSolveForNonnegativeGenerator) {
    // for a positive g with a nontrivial lower bound the reduction must not move the minimum
    const Scaffold s = build_scaffold(1, 4, 1.0);
    Generator g = generators::abs_z(1.0);
    g.lower_bound = generators::constant_bound({0.5}, -0.2);
    const TerminalCondition xi = random_payoff(s, 11);
    const double direct = backward_induce(s, g, xi).Y[0];
    const double reduced = solve_reduced(s, g, xi).original.Y[0];
    EXPECT_NEAR(direct, reduced, 1e-7);
}

TEST(CsvWriters, DoobAndMeasureChange) {
    const Scaffold s = build_scaffold(1, 1, 1.0);
    const Supersolution sol = backward_induce(s, generators::abs_z(0.5), TerminalCondition({1.0, -1.0}));
    std::ostringstream a;
    write_doob_csv(a, s, sol.Y, doob_decompose(s, sol.Y, Measure::base(s)));
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "node,step,Y,M,A,A_increment");
    std::ostringstream b;
    write_measure_change_csv(b, s, girsanov_reduce(s, generators::linear({0.5}, 0.1)).second);
    EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "node,step,shift,density,b,a1,p1,p2");
    EXPECT_NE(b.str().find("0,0,0,1,0.10000000000000001,0.5,0.75,0.25"), std::string::npos) << b.str();
}
