#include "supersol/generator.hpp"
#include "supersol/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace supersol;

namespace {

double at(const Generator& g, double y, std::vector<double> z) { return evaluate(g, 0, 0, y, z); }

}  // namespace

TEST(Evaluate, BuiltinExamples) {
    EXPECT_EQ(at(generators::zero(), 3.0, {-2.0}), 0.0);
    EXPECT_DOUBLE_EQ(at(generators::quadratic(2.0), 0.0, {1.0}), 2.0);
    EXPECT_EQ(at(generators::ball(1.0), 0.0, {2.0}), kInfinity);
    EXPECT_EQ(at(generators::ball(1.0), 0.0, {1.0}), 0.0);
    EXPECT_DOUBLE_EQ(at(generators::abs_z(0.5, 2), 0.0, {3.0, 4.0}), 2.5);
    EXPECT_DOUBLE_EQ(at(generators::linear({0.5}, 0.1), 0.0, {2.0}), 1.1);
    EXPECT_DOUBLE_EQ(at(generators::positive_part_y(0.5), -1.0, {0.0}), 0.0);
    EXPECT_DOUBLE_EQ(at(generators::positive_part_y(0.5), 2.0, {0.0}), 1.0);
    EXPECT_DOUBLE_EQ(at(generators::exp_neg_y(), 0.0, {7.0}), 1.0);
}

TEST(Evaluate, RejectsNonFiniteInput) {
    const Generator g = generators::zero();
    try {
        at(g, std::numeric_limits<double>::quiet_NaN(), {0.0});
        FAIL() << "expected NonFiniteInput";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteInput);
    }
    EXPECT_THROW(at(g, 0.0, {kInfinity}), Error);
}

TEST(QuadraticCapped, EnvelopeBelowQuadraticAndIncreasingInCap) {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const double z = rng.uniform(-10.0, 10.0);
        double prev = -kInfinity;
        for (double cap : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
            const double v = at(generators::quadratic_capped(1.0, cap), 0.0, {z});
            EXPECT_GE(v, prev - 1e-12);
            EXPECT_LE(v, z * z + 1e-12);
            prev = v;
        }
        EXPECT_DOUBLE_EQ(prev, z * z);
    }
}

TEST(FalsifyFlags, Examples) {
    EXPECT_TRUE(falsify_flags(generators::zero()).clean());

    Generator negative;
    negative.fn = [](std::size_t, std::size_t, double, Control) { return -1.0; };
    negative.flags.positive = true;
    const FlagReport r = falsify_flags(negative);
    EXPECT_TRUE(r.violated("positive"));
    ASSERT_FALSE(r.violations.empty());
    EXPECT_FALSE(r.violations.front().witness.empty());

    Generator abs_dec = generators::abs_z(1.0);
    abs_dec.flags.decreasing_y = true;
    EXPECT_TRUE(falsify_flags(abs_dec).clean());
}

TEST(FalsifyFlags, BuiltinsPassWithManySamples) {
    for (std::size_t d : {1u, 2u}) {
        const std::vector<Generator> gens = {generators::zero(d),           generators::abs_z(0.5, d),
                                             generators::quadratic(1.0, d), generators::quadratic_capped(1.0, 4.0, d),
                                             generators::positive_part_y(0.5, d), generators::exp_neg_y(d),
                                             generators::ball(1.0, d),      generators::linear(std::vector<double>(d, 0.5), 0.1)};
        for (const auto& g : gens) {
            FalsifyOptions o;
            o.samples = 10000;
            o.dimension = d;
            const FlagReport r = falsify_flags(g, o);
            EXPECT_TRUE(r.clean()) << g.name << ": " << (r.clean() ? "" : r.violations.front().flag);
        }
    }
}

TEST(FalsifyFlags, DetectsFalseDeclarations) {
    Generator g = generators::quadratic(1.0);
    g.flags.increasing_y = true;
    g.flags.decreasing_y = true;
    EXPECT_TRUE(falsify_flags(g).violated("increasing_y/decreasing_y"));

    Generator concave;
    concave.fn = [](std::size_t, std::size_t, double, Control z) { return -z[0] * z[0]; };
    concave.flags.convex_z = true;
    EXPECT_TRUE(falsify_flags(concave).violated("convex_z"));

    Generator ydep = generators::exp_neg_y();
    ydep.flags.y_independent = true;
    EXPECT_TRUE(falsify_flags(ydep).violated("y_independent"));

    Generator dec = generators::positive_part_y(1.0);
    dec.flags.increasing_y = false;
    dec.flags.decreasing_y = true;
    EXPECT_TRUE(falsify_flags(dec).violated("decreasing_y"));

    Generator below = generators::abs_z(1.0);
    below.lower_bound = generators::constant_bound({0.0}, 1.0);
    EXPECT_TRUE(falsify_flags(below).violated("lower_bound"));

    Generator jump;
    jump.fn = [](std::size_t, std::size_t, double, Control z) { return z[0] > 0.0 ? 0.0 : 1.0; };
    jump.flags.lsc = true;
    FalsifyOptions o;
    o.samples = 5000;
    EXPECT_TRUE(falsify_flags(jump, o).violated("lsc"));
}

TEST(ConjugateZ, Examples) {
    const std::vector<double> two = {2.0};
    EXPECT_NEAR(conjugate_z(generators::quadratic(0.5), 0, 0, 0.0, two, 10.0), 2.0, 1e-8);
    const std::vector<double> half = {0.5};
    EXPECT_NEAR(conjugate_z(generators::abs_z(1.0), 0, 0, 0.0, half, 10.0), 0.0, 1e-8);
    const std::vector<double> zero = {0.0};
    EXPECT_NEAR(conjugate_z(generators::zero(), 0, 0, 0.0, zero, 10.0), 0.0, 1e-8);
}

TEST(ConjugateZ, BoundaryActiveCarriesLowerBound) {
    const std::vector<double> q = {2.0};
    try {
        conjugate_z(generators::abs_z(1.0), 0, 0, 0.0, q, 3.0);
        FAIL() << "expected BoundaryActive";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BoundaryActive);
        ASSERT_TRUE(e.value().has_value());
        EXPECT_NEAR(*e.value(), 3.0, 1e-6);
    }
    Generator nonconvex = generators::abs_z(1.0);
    nonconvex.flags.convex_z = false;
    EXPECT_THROW(conjugate_z(nonconvex, 0, 0, 0.0, q, 3.0), Error);
}

TEST(ConjugateZ, MonotoneInRadiusAndConvexInQ) {
    const Generator g = generators::quadratic(0.5, 2);
    Rng rng(21);
    auto conj = [&](const std::vector<double>& q, double R) {
        try {
            return conjugate_z(g, 0, 0, 0.0, q, R);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BoundaryActive) throw;
            return *e.value();
        }
    };
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> q1 = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const std::vector<double> q2 = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const double lam = rng.uniform();
        const std::vector<double> qm = {lam * q1[0] + (1 - lam) * q2[0], lam * q1[1] + (1 - lam) * q2[1]};
        EXPECT_LE(conj(qm, 10.0), lam * conj(q1, 10.0) + (1 - lam) * conj(q2, 10.0) + 1e-8);
        const double r1 = rng.uniform(0.5, 2.0);
        EXPECT_LE(conj(q1, r1), conj(q1, r1 + 1.0) + 1e-8);
    }
}

TEST(VanishesAtZero, Detection) {
    EXPECT_TRUE(vanishes_at_zero_control(generators::abs_z(1.0), 1));
    EXPECT_TRUE(vanishes_at_zero_control(generators::ball(0.0), 2));
    EXPECT_FALSE(vanishes_at_zero_control(generators::exp_neg_y(), 1));
    EXPECT_FALSE(vanishes_at_zero_control(generators::positive_part_y(1.0), 1));
}

TEST(Scaled, ScalesValuesAndBounds) {
    const Generator g = generators::scaled(generators::linear({1.0}, 2.0), 0.5);
    EXPECT_DOUBLE_EQ(at(g, 0.0, {2.0}), 2.0);
    EXPECT_DOUBLE_EQ(g.lower_bound->b(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(g.lower_bound->a(0, 0)[0], 0.5);
    EXPECT_EQ(at(generators::scaled(generators::ball(1.0), 0.5), 0.0, {3.0}), kInfinity);
}
