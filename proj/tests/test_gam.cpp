#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "igam/gam.hpp"

using namespace igam;

namespace {

Dataset make(std::size_t n, std::uint64_t seed, double (*f)(double, double), double noise = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0), e(-1.0, 1.0);
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(n), 2);
    d.feature_names = {"a", "b"};
    d.target_name = "y";
    for (std::size_t i = 0; i < n; ++i) {
        const double a = u(rng), b = u(rng);
        d.features(static_cast<Eigen::Index>(i), 0) = a;
        d.features(static_cast<Eigen::Index>(i), 1) = b;
        d.target.push_back(f(a, b) + noise * e(rng));
    }
    d.weights.assign(n, 1.0);
    return d;
}

double additive(double a, double b) { return 3.0 * a * a + std::sin(4.0 * b); }
double constant(double, double) { return 4.25; }

TrainConfig quick(std::size_t rounds = 30) {
    TrainConfig c;
    c.rounds = rounds;
    c.grid_size = 32;
    return c;
}

} // namespace

TEST(ShapeFunction, InterpolationAndExtrapolation) {
    ShapeFunction f{{0.0, 1.0, 3.0}, {1.0, 3.0, 2.0}};
    EXPECT_EQ(f(0.0), 1.0);
    EXPECT_EQ(f(1.0), 3.0);
    EXPECT_EQ(f(3.0), 2.0);
    EXPECT_DOUBLE_EQ(f(0.5), 2.0);
    EXPECT_DOUBLE_EQ(f(2.0), 2.5);
    EXPECT_DOUBLE_EQ(f(-1.0), -1.0); // left slope 2
    EXPECT_DOUBLE_EQ(f(5.0), 1.0);   // right slope -0.5
    EXPECT_EQ(f.left_slope(), 2.0);
    EXPECT_EQ(f.right_slope(), -0.5);
    ShapeFunction flat{{2.0}, {0.0}};
    EXPECT_EQ(flat(100.0), 0.0);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(validate(c));
    c.lambda = -1;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.alpha = 1.0;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.step = 0.0;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.k_basis = 0;
    EXPECT_THROW(validate(c), ValidationError);
    const auto lf = TrainConfig::load_forecasting();
    EXPECT_EQ(lf.lambda, 0.1);
    EXPECT_EQ(lf.k_basis, 5u);
    EXPECT_EQ(lf.step, 0.05);
    EXPECT_EQ(lf.alpha, 0.1);
    const auto bm = TrainConfig::benchmark();
    EXPECT_EQ(bm.lambda, 1.0);
    EXPECT_EQ(bm.k_basis, 7u);
    EXPECT_EQ(bm.step, 0.1);
}

TEST(InitModel, ZeroModel) {
    const Dataset d = make(200, 1, additive);
    const NormStats s = fit_normalization(d, true);
    const Dataset nd = apply_normalization(d, s);
    const InitResult init = init_model(nd, s, quick());
    EXPECT_EQ(init.state.residuals, nd.target);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto& f = init.model.shapes[j];
        const auto x = nd.column(j);
        EXPECT_EQ(f.anchors.front(), *std::min_element(x.begin(), x.end()));
        EXPECT_EQ(f.anchors.back(), *std::max_element(x.begin(), x.end()));
        EXPECT_TRUE(std::all_of(f.values.begin(), f.values.end(), [](double v) { return v == 0.0; }));
    }
    const auto pred = predict_normalized(init.model, d.features);
    for (double p : pred) EXPECT_EQ(p, 0.0);
    const auto raw = predict(init.model, d.features);
    EXPECT_DOUBLE_EQ(raw[0], s.target->mean);
    EXPECT_EQ(compute_residuals(nd, init.model), nd.target);
}

TEST(ComputeResiduals, Additivity) {
    const Dataset d = make(100, 2, additive);
    const NormStats s = fit_normalization(d, false);
    const Dataset nd = apply_normalization(d, s);
    InitResult init = init_model(nd, s, quick());
    for (auto& v : init.model.shapes[1].values) v += 0.75;
    const auto r = compute_residuals(nd, init.model);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i], nd.target[i] - 0.75);
    Dataset other = nd;
    other.features.conservativeResize(Eigen::NoChange, 1);
    other.feature_names.pop_back();
    EXPECT_THROW(compute_residuals(other, init.model), ValidationError);
}

TEST(BoostFeature, OneRoundReducesWeightedLoss) {
    Dataset d;
    d.features.resize(100, 1);
    for (int i = 0; i < 100; ++i) {
        d.features(i, 0) = i / 99.0;
        d.target.push_back(i / 99.0);
    }
    d.weights.assign(100, 1.0);
    d.feature_names = {"x"};
    TrainConfig c = quick(1);
    c.standardize_target = false;
    const GamModel m = train(d, c);
    ASSERT_EQ(m.meta.weighted_loss_trace.size(), 2u);
    EXPECT_LT(m.meta.weighted_loss_trace[1], m.meta.weighted_loss_trace[0]);
}

TEST(BoostFeature, ResidualsStayExactAndZeroStepIsNoOp) {
    const Dataset d = make(150, 3, additive, 0.1);
    const NormStats s = fit_normalization(d, true);
    const Dataset nd = apply_normalization(d, s);
    TrainConfig c = quick();
    InitResult init = init_model(nd, s, c);
    for (int round = 0; round < 3; ++round) {
        for (std::size_t j = 0; j < 2; ++j) {
            boost_feature(init.state, j, init.model, c, nd, {});
            EXPECT_EQ(init.state.residuals, compute_residuals(nd, init.model));
        }
    }
    const auto before = init.model.shapes;
    TrainConfig zero = c;
    zero.step = 0.0;
    boost_feature(init.state, 0, init.model, zero, nd, {});
    EXPECT_EQ(init.model.shapes[0].values, before[0].values);
}

TEST(Train, ConstantTarget) {
    const Dataset d = make(300, 4, constant);
    const GamModel m = train(d, quick(20));
    for (double p : predict(m, d)) EXPECT_NEAR(p, 4.25, 1e-6);
}

TEST(Train, LinearExtrapolation) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0), e(-0.05, 0.05);
    Dataset d;
    d.features.resize(1000, 1);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        d.features(i, 0) = x;
        d.target.push_back(2.0 * x + e(rng));
    }
    d.weights.assign(1000, 1.0);
    d.feature_names = {"x"};
    const GamModel m = train(d, TrainConfig::benchmark());
    Eigen::MatrixXd q(1, 1);
    q << 1.5;
    EXPECT_NEAR(predict(m, q)[0], 3.0, 0.2);
    Eigen::MatrixXd ray(91, 1);
    for (int k = 0; k <= 90; ++k) ray(k, 0) = 1.1 + 0.01 * k;
    const auto p = predict(m, ray);
    for (std::size_t k = 1; k + 1 < p.size(); ++k) EXPECT_NEAR(p[k + 1] - 2 * p[k] + p[k - 1], 0.0, 1e-9);
}

TEST(Train, RecoversAdditiveStructure) {
    const Dataset d = make(800, 6, additive, 0.05);
    const GamModel m = train(d, quick(100));
    const auto p = predict(m, d);
    double sse = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sse += (p[i] - d.target[i]) * (p[i] - d.target[i]);
    EXPECT_LT(sse / static_cast<double>(p.size()), 0.02);
    EXPECT_EQ(m.meta.loss_trace.size(), 101u);
    EXPECT_DOUBLE_EQ(m.meta.loss_trace.back(), sse / static_cast<double>(p.size()));
}

TEST(Train, Deterministic) {
    const Dataset d = make(300, 7, additive, 0.1);
    const GamModel a = train(d, quick());
    const GamModel b = train(d, quick());
    EXPECT_EQ(a.meta.loss_trace, b.meta.loss_trace);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(a.shapes[j].values, b.shapes[j].values);
}

TEST(Train, MonotoneConstraintOnFullRange) {
    // Target decreases in a; an increase constraint must still hold.
    auto f = [](double a, double b) { return -2.0 * a + b; };
    const Dataset d = make(400, 8, +f, 0.1);
    ConstraintSpec c{0, ConstraintKind::increase, -1.0, 2.0, "c1", 0};
    const std::vector<ConstraintSpec> cs{c};
    const GamModel m = train(d, quick(), cs);
    EXPECT_TRUE(is_monotone(m.shapes[0].values, +1));
    EXPECT_EQ(m.constraints.size(), 1u);
}

TEST(Train, SubrangeConstraintsAllKinds) {
    const Dataset d = make(500, 9, additive, 0.1);
    for (auto kind : {ConstraintKind::increase, ConstraintKind::decrease, ConstraintKind::convex,
                      ConstraintKind::concave}) {
        const std::vector<ConstraintSpec> cs{{1, kind, 0.2, 0.8, "c", 0}};
        const GamModel m = train(d, quick(20), cs);
        const auto act = resolve_constraint(m, cs[0]);
        const auto& f = m.shapes[1];
        const std::span<const double> v(f.values);
        const std::span<const double> a(f.anchors);
        EXPECT_TRUE(is_feasible(kind, v.subspan(act.window.first, act.window.size()),
                                a.subspan(act.window.first, act.window.size()), 1e-9))
            << to_string(kind);
    }
}

TEST(Train, ConstraintCoveringOneAnchorRejected) {
    const Dataset d = make(50, 10, additive);
    TrainConfig c = quick();
    c.grid_size = 2;
    const std::vector<ConstraintSpec> cs{{0, ConstraintKind::increase, 0.49, 0.5, "c", 0}};
    EXPECT_THROW(train(d, c, cs), ValidationError);
}

TEST(Train, ConstantFeatureIsSkipped) {
    Dataset d = make(100, 11, additive);
    for (Eigen::Index i = 0; i < 100; ++i) d.features(i, 1) = 7.0;
    const GamModel m = train(d, quick());
    EXPECT_EQ(m.shapes[1].anchors.size(), 1u);
    EXPECT_EQ(m.shapes[1].values[0], 0.0);
}

TEST(Train, PiecewiseLinearClosure) {
    const Dataset d = make(300, 12, additive, 0.1);
    const GamModel m = train(d, quick(40));
    // Every boosting increment has its knots on the anchors, so sampling the
    // model between anchors must agree with interpolating the stored values.
    const NormStats& s = m.norm;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    const TrainConfig c = quick(40);
    const Dataset nd = apply_normalization(d, s);
    InitResult init = init_model(nd, s, c);
    std::vector<std::vector<pla::PiecewiseLinearFn>> increments(2);
    for (std::size_t t = 0; t < c.rounds; ++t) {
        for (std::size_t j = 0; j < 2; ++j) increments[j].push_back(boost_feature(init.state, j, init.model, c, nd, {}));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        for (int k = 0; k < 1000; ++k) {
            const double x = s.features[j].forward(u(rng));
            double direct = 0.0;
            for (const auto& g : increments[j]) direct += c.step * g(x);
            EXPECT_NEAR(init.model.shapes[j](x), direct, 1e-12 * std::max(1.0, std::abs(direct)));
        }
    }
    EXPECT_EQ(init.model.shapes[0].values, m.shapes[0].values);
}

TEST(Predict, EqualsSumOfShapes) {
    const Dataset d = make(200, 13, additive, 0.1);
    const GamModel m = train(d, quick());
    const auto pred = predict_normalized(m, d.features);
    for (Eigen::Index i = 0; i < 20; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 2; ++j) s += m.shapes[j](m.norm.features[j].forward(d.features(i, static_cast<Eigen::Index>(j))));
        EXPECT_EQ(pred[static_cast<std::size_t>(i)], s);
    }
    // At an anchor the stored value is returned.
    const auto& f = m.shapes[0];
    EXPECT_EQ(f(f.anchors[3]), f.values[3]);
    Eigen::MatrixXd bad(1, 3);
    EXPECT_THROW(predict(m, bad), ValidationError);
}

TEST(ShapeValues, CenteringPreservesPredictions) {
    const Dataset d = make(200, 14, additive, 0.1);
    const GamModel m = train(d, quick());
    const auto pred = predict(m, d);
    const ShapeView v0 = shape_values(m, 0, true, true);
    const ShapeView v1 = shape_values(m, 1, true, true);
    auto eval = [](const ShapeView& v, double x) {
        ShapeFunction f{v.anchors, v.values};
        return f(x);
    };
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const double s = eval(v0, d.column(0)[i]) + eval(v1, d.column(1)[i]) + m.display_intercept;
        EXPECT_NEAR(s, pred[i], 1e-10 * std::max(1.0, std::abs(pred[i])));
    }
}

TEST(ShapeValues, RawAnchorsAreInverseTransformed) {
    const Dataset d = make(100, 15, additive);
    const GamModel m = train(d, quick(5));
    const ShapeView raw = shape_values(m, 0, true);
    const ShapeView norm = shape_values(m, 0, false);
    for (std::size_t j = 0; j < raw.anchors.size(); ++j) {
        EXPECT_EQ(raw.anchors[j], norm.anchors[j] * m.norm.features[0].scale + m.norm.features[0].mean);
    }
    const double lo = *std::min_element(d.column(0).begin(), d.column(0).end());
    EXPECT_NEAR(raw.anchors.front(), lo, 1e-12 * std::max(1.0, std::abs(lo)));
}

TEST(ShapeValues, ZeroModelIsZero) {
    const Dataset d = make(100, 16, additive);
    const NormStats s = fit_normalization(d, true);
    const InitResult init = init_model(apply_normalization(d, s), s, quick());
    const ShapeView v = shape_values(init.model, 1, true);
    for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(Density, MassSumsToOne) {
    const std::vector<double> anchors{0, 1, 2, 4};
    const std::vector<double> x{-1, 0, 0.5, 1, 2, 3.9, 4, 10};
    const DensityProfile p = density_profile(anchors, x);
    EXPECT_EQ(p.counts, (std::vector<std::size_t>{3, 1, 4}));
    double total = 0.0;
    for (double v : p.mass) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(WarmStart, ContinuesFromPreviousShapes) {
    const Dataset d = make(300, 17, additive, 0.1);
    TrainConfig c = quick(10);
    const GamModel first = train(d, c);
    c.warm_start = true;
    const GamModel second = train(d, c, {}, &first);
    EXPECT_EQ(second.meta.loss_trace.front(), first.meta.loss_trace.back());
    EXPECT_LT(second.meta.loss_trace.back(), first.meta.loss_trace.back());
}
