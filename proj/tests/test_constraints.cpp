#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "igam/constraints.hpp"

using namespace igam;

namespace {

using Vec = std::vector<double>;

std::vector<double> uniform_anchors(std::size_t m) {
    Vec a(m);
    for (std::size_t i = 0; i < m; ++i) a[i] = static_cast<double>(i);
    return a;
}

// Running max / suffix min written out directly.
Vec envelope_average(const Vec& v) {
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double hi = v[0];
        for (std::size_t j = 0; j <= i; ++j) hi = std::max(hi, v[j]);
        double lo = v[i];
        for (std::size_t j = i; j < v.size(); ++j) lo = std::min(lo, v[j]);
        out[i] = (hi + lo) / 2;
    }
    return out;
}

} // namespace

TEST(ProjectIncreasing, EnvelopeExample) {
    EXPECT_EQ(project_increasing(Vec{3, 1, 2}), (Vec{2, 2, 2.5}));
    EXPECT_EQ(project_increasing(Vec{1, 2, 3}), (Vec{1, 2, 3}));
    EXPECT_EQ(project_increasing(Vec{4, 4, 4}), (Vec{4, 4, 4}));
}

TEST(ProjectIncreasing, MatchesQuadraticEnvelope) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 100; ++rep) {
        Vec v(1 + rng() % 40);
        for (auto& x : v) x = g(rng);
        EXPECT_EQ(project_increasing(v), envelope_average(v));
    }
}

TEST(ProjectDecreasing, Examples) {
    EXPECT_EQ(project_decreasing(Vec{2, 1, 3}), (Vec{2.5, 2, 2}));
    EXPECT_EQ(project_decreasing(Vec{3, 2, 1}), (Vec{3, 2, 1}));
    EXPECT_EQ(project_decreasing(Vec{7}), (Vec{7}));
}

TEST(ProjectConvex, SlopePipeline) {
    const auto a = uniform_anchors(4);
    EXPECT_EQ(project_convex(Vec{0, 2, 2, 6}, a), (Vec{0, 1, 2, 6}));
    EXPECT_EQ(project_convex(Vec{1, 3, 5, 7}, a), (Vec{1, 3, 5, 7}));
    EXPECT_EQ(project_convex(Vec{0, 1, 4}, uniform_anchors(3)), (Vec{0, 1, 4}));
    EXPECT_EQ(project_convex(Vec{5, -1}, uniform_anchors(2)), (Vec{5, -1}));
}

TEST(ProjectConcave, SlopePipeline) {
    const auto a = uniform_anchors(4);
    EXPECT_EQ(project_concave(Vec{0, 4, 4, 6}, a), (Vec{0, 4, 5, 6}));
    EXPECT_EQ(project_concave(Vec{1, 3, 5, 7}, a), (Vec{1, 3, 5, 7}));
    EXPECT_EQ(project_concave(Vec{0, 3, 4}, uniform_anchors(3)), (Vec{0, 3, 4}));
}

TEST(ProjectConvex, NonUniformAnchorsUseSlopes) {
    // Slopes 1 then 2 over gaps 1 and 0.25: convex even though the raw
    // value differences (1, 0.5) decrease.
    const Vec a{0, 1, 1.25};
    const Vec v{0, 1, 1.5};
    EXPECT_TRUE(is_feasible(ConstraintKind::convex, v, a));
    EXPECT_EQ(project_convex(v, a), v);
}

TEST(ProjectConvex, DuplicateAnchorsRejected) {
    EXPECT_THROW(project_convex(Vec{0, 1, 2}, Vec{0, 1, 1}), ValidationError);
}

TEST(ProjectionProperties, RandomVectorsAllKinds) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> gap(0.01, 2.0);
    const ConstraintKind kinds[] = {ConstraintKind::increase, ConstraintKind::decrease, ConstraintKind::convex,
                                    ConstraintKind::concave};
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t m = 1 + rng() % 64;
        Vec v(m), a(m);
        const double offset = rep % 5 == 0 ? 1e3 * g(rng) : 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            v[i] = offset + 10 * g(rng);
            a[i] = i == 0 ? g(rng) : a[i - 1] + gap(rng);
        }
        for (auto kind : kinds) {
            const Vec p = project(kind, v, a);
            EXPECT_TRUE(is_feasible(kind, p, a)) << "feasibility " << to_string(kind) << " rep " << rep;
            EXPECT_EQ(project(kind, p, a), p) << "idempotence " << to_string(kind) << " rep " << rep;
            if (kind == ConstraintKind::increase || kind == ConstraintKind::decrease) {
                const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
                for (double x : p) {
                    EXPECT_GE(x, *lo);
                    EXPECT_LE(x, *hi);
                }
            }
        }
        Vec neg(m);
        for (std::size_t i = 0; i < m; ++i) neg[i] = -v[i];
        const Vec inc = project_increasing(neg);
        const Vec dec = project_decreasing(v);
        for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(dec[i], -inc[i], 1e-12 * std::max(1.0, std::abs(dec[i])));
    }
}

TEST(ProjectionProperties, FeasibleInputIsFixedPoint) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t m = 2 + rng() % 30;
        Vec a(m), inc(m), cvx(m);
        double slope = g(rng);
        for (std::size_t i = 0; i < m; ++i) {
            a[i] = i == 0 ? 0.0 : a[i - 1] + 0.1 + std::abs(g(rng));
            inc[i] = i == 0 ? g(rng) : inc[i - 1] + std::abs(g(rng));
            if (i == 0) {
                cvx[i] = g(rng);
            } else {
                cvx[i] = cvx[i - 1] + slope * (a[i] - a[i - 1]);
                slope += std::abs(g(rng));
            }
        }
        EXPECT_EQ(project_increasing(inc), inc);
        Vec dec(inc.rbegin(), inc.rend());
        EXPECT_EQ(project_decreasing(dec), dec);
        ASSERT_TRUE(is_feasible(ConstraintKind::convex, cvx, a));
        EXPECT_EQ(project_convex(cvx, a), cvx);
        Vec ccv(m);
        for (std::size_t i = 0; i < m; ++i) ccv[i] = -cvx[i];
        EXPECT_EQ(project_concave(ccv, a), ccv);
    }
}

TEST(ProjectionProperties, BlendOfFeasibleStaysFeasible) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t m = 3 + rng() % 20;
        Vec a(m), u(m), v(m);
        for (std::size_t i = 0; i < m; ++i) {
            a[i] = i == 0 ? 0.0 : a[i - 1] + 0.2 + std::abs(g(rng));
            u[i] = g(rng);
            v[i] = g(rng);
        }
        for (auto kind : {ConstraintKind::increase, ConstraintKind::decrease, ConstraintKind::convex,
                          ConstraintKind::concave}) {
            const Vec pu = project(kind, u, a), pv = project(kind, v, a);
            Vec blend(m);
            for (std::size_t i = 0; i < m; ++i) blend[i] = 0.1 * pu[i] + 0.9 * pv[i];
            EXPECT_TRUE(is_feasible(kind, blend, a)) << to_string(kind);
        }
    }
}

TEST(ProjectWindow, OnlyInRangeAnchorsChange) {
    const Vec anchors{0, 1, 2, 3, 4, 5};
    const Vec values{5, 4, 3, 1, 2, 0};
    const AnchorWindow w = anchor_window(anchors, 1.5, 4.5);
    EXPECT_EQ(w.first, 2u);
    EXPECT_EQ(w.last, 5u);
    const auto r = project_window(ConstraintKind::increase, values, anchors, w);
    EXPECT_TRUE(r.changed);
    EXPECT_EQ(r.values[0], 5.0);
    EXPECT_EQ(r.values[1], 4.0);
    EXPECT_EQ(r.values[5], 0.0);
    EXPECT_TRUE(is_monotone(std::span<const double>(r.values).subspan(2, 3), +1));
    const auto again = project_window(ConstraintKind::increase, r.values, anchors, w);
    EXPECT_EQ(again.values, r.values);
    EXPECT_FALSE(again.changed);
    EXPECT_EQ(again.max_displacement, 0.0);
}

TEST(ProjectWindow, FullRangeOnFeasibleShapeIsIdentity) {
    const Vec anchors{0, 1, 2, 3};
    const Vec values{-1, 0, 0, 2};
    const auto r = project_window(ConstraintKind::increase, values, anchors, anchor_window(anchors, -10, 10));
    EXPECT_EQ(r.values, values);
    EXPECT_FALSE(r.changed);
}

TEST(ProjectWindow, NeedsTwoAnchors) {
    const Vec anchors{0, 1, 2, 3};
    const Vec values{0, 0, 0, 0};
    try {
        project_window(ConstraintKind::convex, values, anchors, anchor_window(anchors, 0.5, 1.5));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("1 anchor"), std::string::npos) << e.what();
    }
}

TEST(ConstraintKind, StringRoundTrip) {
    for (auto k : {ConstraintKind::increase, ConstraintKind::decrease, ConstraintKind::convex, ConstraintKind::concave}) {
        EXPECT_EQ(parse_constraint_kind(to_string(k)), k);
    }
    EXPECT_THROW(parse_constraint_kind("Increase"), ValidationError);
}
