#pragma once

// Boosted piecewise-linear GAM: y ~ sum_d f_d(x_d), every f_d stored as values
// on an anchor grid (feature min, grid thresholds, feature max). Each boosting
// increment is a hinge expansion with knots on the grid, so the anchor
// representation stays exact.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "igam/constraints.hpp"
#include "igam/dataset.hpp"
#include "igam/error.hpp"
#include "igam/pla.hpp"

namespace igam {

struct ShapeFunction {
    std::vector<double> anchors; // normalized feature units, strictly increasing
    std::vector<double> values;  // normalized target units
    double offset = 0.0;         // weighted training mean of f_d, for display centering

    std::size_t size() const { return anchors.size(); }

    /// Segment used for x: k with anchors[k] <= x < anchors[k+1], clamped to the
    /// edge segments outside the range.
    std::size_t segment(double x) const {
        if (anchors.size() < 2) return 0;
        const auto it = std::upper_bound(anchors.begin(), anchors.end(), x);
        std::size_t k = it == anchors.begin() ? 0 : static_cast<std::size_t>(it - anchors.begin()) - 1;
        return std::min(k, anchors.size() - 2);
    }

    double evaluate_segment(std::size_t k, double x) const {
        if (anchors.size() < 2) return values.empty() ? 0.0 : values[0];
        const double a0 = anchors[k];
        const double a1 = anchors[k + 1];
        if (x == a0) return values[k];
        if (x == a1) return values[k + 1];
        return values[k] + (values[k + 1] - values[k]) * ((x - a0) / (a1 - a0));
    }

    double operator()(double x) const { return evaluate_segment(segment(x), x); }

    double left_slope() const {
        if (anchors.size() < 2) return 0.0;
        return (values[1] - values[0]) / (anchors[1] - anchors[0]);
    }

    double right_slope() const {
        const std::size_t m = anchors.size();
        if (m < 2) return 0.0;
        return (values[m - 1] - values[m - 2]) / (anchors[m - 1] - anchors[m - 2]);
    }
};

struct TrainConfig {
    double lambda = 1.0;
    std::size_t k_basis = 7;
    double step = 0.1;
    std::size_t rounds = 100;
    double alpha = 0.1;
    std::size_t grid_size = 256;
    bool pairwise = true;
    bool standardize_target = true;
    std::uint64_t seed = 0;
    bool warm_start = false;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

    /// Public regression benchmarks.
    static TrainConfig benchmark() { return TrainConfig{}; }

    /// Load forecasting runs: target kept in raw units.
    static TrainConfig load_forecasting() {
        TrainConfig c;
        c.lambda = 0.1;
        c.k_basis = 5;
        c.step = 0.05;
        c.alpha = 0.1;
        c.standardize_target = false;
        return c;
    }
};

inline void validate(const TrainConfig& c) {
    if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw ValidationError("lambda must be >= 0");
    if (c.k_basis < 1) throw ValidationError("k_basis must be >= 1");
    if (!(c.step > 0.0) || !std::isfinite(c.step)) throw ValidationError("step must be > 0");
    if (c.rounds < 1) throw ValidationError("rounds must be >= 1");
    if (!(c.alpha >= 0.0 && c.alpha < 1.0)) throw ValidationError("alpha must lie in [0, 1)");
    if (c.grid_size < 1) throw ValidationError("grid_size must be >= 1");
}

struct TrainingMeta {
    // Entry 0 is the zero model, entry t the model after round t.
    std::vector<double> loss_trace;          // unweighted MSE, raw target units
    std::vector<double> weighted_loss_trace; // sum w r^2 / sum w, normalized target units
    std::size_t rows = 0;
};

struct GamModel {
    std::vector<std::string> feature_names;
    std::string target_name;
    std::vector<ShapeFunction> shapes;
    NormStats norm;
    TrainConfig config;
    std::vector<ConstraintSpec> constraints;
    double display_intercept = 0.0; // raw target units
    TrainingMeta meta;

    std::size_t features() const { return shapes.size(); }

    std::ptrdiff_t feature_index(std::string_view name) const {
        for (std::size_t d = 0; d < feature_names.size(); ++d) {
            if (feature_names[d] == name) return static_cast<std::ptrdiff_t>(d);
        }
        return -1;
    }
};

/// Per-training caches. `contrib(i, d)` is f_d evaluated at row i, always
/// refreshed right after f_d changes, so residuals are exact.
struct BoostState {
    std::vector<std::optional<pla::SortedFeature>> sorted; // nullopt for skipped (constant) features
    std::vector<std::vector<std::size_t>> segments;        // per feature, per row
    Eigen::MatrixXd contrib;                               // N x D
    std::vector<double> residuals;
    std::size_t round = 0;
};

struct InitResult {
    GamModel model;
    BoostState state;
};

namespace gam_detail {

inline void refresh_contrib(BoostState& st, const ShapeFunction& f, std::size_t d, std::span<const double> x) {
    const auto dd = static_cast<Eigen::Index>(d);
    for (std::size_t i = 0; i < x.size(); ++i) {
        st.contrib(static_cast<Eigen::Index>(i), dd) = f.evaluate_segment(st.segments[d][i], x[i]);
    }
}

inline double row_sum(const Eigen::MatrixXd& contrib, Eigen::Index i) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < contrib.cols(); ++d) s += contrib(i, d);
    return s;
}

inline void refresh_residuals(BoostState& st, std::span<const double> y) {
    for (std::size_t i = 0; i < y.size(); ++i) st.residuals[i] = y[i] - row_sum(st.contrib, static_cast<Eigen::Index>(i));
}

inline ShapeFunction zero_shape(std::span<const double> x, const std::optional<pla::ThresholdGrid>& grid) {
    ShapeFunction f;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    f.anchors.push_back(*lo);
    if (grid) {
        f.anchors.insert(f.anchors.end(), grid->thresholds.begin(), grid->thresholds.end());
        f.anchors.push_back(*hi);
    }
    f.values.assign(f.anchors.size(), 0.0);
    return f;
}

inline void check_schema(const GamModel& m, std::size_t cols) {
    if (m.shapes.size() != cols) {
        throw ValidationError("schema mismatch: model has " + std::to_string(m.shapes.size()) + " features, input has " +
                              std::to_string(cols));
    }
}

} // namespace gam_detail

/// Zero model on an already-normalized dataset. Features with a single
/// distinct value get one anchor and are never updated.
inline InitResult init_model(const Dataset& nd, const NormStats& norm, const TrainConfig& cfg) {
    validate(cfg);
    validate(nd);
    const std::size_t n = nd.rows();
    const std::size_t dims = nd.cols();
    InitResult out;
    GamModel& m = out.model;
    BoostState& st = out.state;
    m.feature_names = nd.feature_names;
    m.target_name = nd.target_name;
    m.norm = norm;
    m.config = cfg;
    st.sorted.resize(dims);
    st.segments.resize(dims);
    st.contrib = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    for (std::size_t d = 0; d < dims; ++d) {
        const auto x = nd.column(d);
        std::optional<pla::ThresholdGrid> grid;
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        if (n >= 2 && *lo < *hi) grid = pla::build_threshold_grid(x, cfg.grid_size);
        m.shapes.push_back(gam_detail::zero_shape(x, grid));
        if (grid) st.sorted[d] = pla::sort_feature(x, nd.weights, *grid);
        st.segments[d].resize(n);
        for (std::size_t i = 0; i < n; ++i) st.segments[d][i] = m.shapes[d].segment(x[i]);
    }
    st.residuals.assign(nd.target.begin(), nd.target.end());
    return out;
}

/// r_i = y_i - sum_d f_d(x_i^d) on a normalized dataset.
inline std::vector<double> compute_residuals(const Dataset& nd, const GamModel& m) {
    gam_detail::check_schema(m, nd.cols());
    std::vector<double> r(nd.rows());
    for (std::size_t i = 0; i < nd.rows(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < nd.cols(); ++d) s += m.shapes[d](nd.column(d)[i]);
        r[i] = nd.target[i] - s;
    }
    return r;
}

/// A constraint resolved to an anchor window of one shape.
struct ActiveConstraint {
    ConstraintKind kind = ConstraintKind::increase;
    AnchorWindow window;
};

/// Anchor window of `c` on the model's shape, converting the raw range to
/// normalized units. Fewer than 2 anchors is a validation error.
inline ActiveConstraint resolve_constraint(const GamModel& m, const ConstraintSpec& c) {
    if (c.feature >= m.shapes.size()) {
        throw ValidationError("constraint feature index " + std::to_string(c.feature) + " out of range");
    }
    if (!(c.lo < c.hi)) throw ValidationError("constraint range must satisfy lo < hi");
    const ColumnStats& s = m.norm.features[c.feature];
    const auto& anchors = m.shapes[c.feature].anchors;
    const AnchorWindow w = anchor_window(anchors, s.forward(c.lo), s.forward(c.hi));
    if (w.size() < 2) {
        throw ValidationError("constraint range [" + format_real(c.lo) + ", " + format_real(c.hi) + "] on '" +
                              m.feature_names[c.feature] + "' covers " + std::to_string(w.size()) +
                              " anchor(s); at least 2 anchors are needed");
    }
    return {c.kind, w};
}

/// Constraints of feature d in application order (created_at, then list order).
inline std::vector<ActiveConstraint> active_constraints(const GamModel& m, std::span<const ConstraintSpec> all,
                                                        std::size_t d) {
    std::vector<const ConstraintSpec*> mine;
    for (const auto& c : all) {
        if (c.feature == d) mine.push_back(&c);
    }
    std::stable_sort(mine.begin(), mine.end(),
                     [](const ConstraintSpec* a, const ConstraintSpec* b) { return a->created_at < b->created_at; });
    std::vector<ActiveConstraint> out;
    for (const auto* c : mine) out.push_back(resolve_constraint(m, *c));
    return out;
}

/// P applied window by window, in order.
inline std::vector<double> project_shape(const ShapeFunction& f, std::vector<double> values,
                                         std::span<const ActiveConstraint> cs) {
    for (const auto& c : cs) values = project_window(c.kind, values, f.anchors, c.window).values;
    return values;
}

/// One inner step of cyclic boosting on feature d: fit g to the current
/// residuals, update f_d (plain step, or the blended projected step when d is
/// constrained), then refresh f_d's cached contributions and all residuals.
/// Returns g; a zero g leaves everything untouched.
inline pla::PiecewiseLinearFn boost_feature(BoostState& st, std::size_t d, GamModel& m, const TrainConfig& cfg,
                                            const Dataset& nd, std::span<const ActiveConstraint> cs) {
    if (!st.sorted[d]) return {};
    const pla::FitOptions opt{cfg.lambda, cfg.k_basis, cfg.pairwise};
    const pla::PiecewiseLinearFn g = pla::fit_pla(*st.sorted[d], st.residuals, opt).fn;
    if (g.is_zero()) return g;

    ShapeFunction& f = m.shapes[d];
    std::vector<double> cand(f.values.size());
    for (std::size_t j = 0; j < cand.size(); ++j) cand[j] = f.values[j] + cfg.step * g(f.anchors[j]);
    if (cand == f.values) return g;
    if (cs.empty()) {
        f.values = std::move(cand);
    } else {
        const auto p = project_shape(f, std::move(cand), cs);
        for (std::size_t j = 0; j < p.size(); ++j) f.values[j] = cfg.alpha * f.values[j] + (1.0 - cfg.alpha) * p[j];
    }
    gam_detail::refresh_contrib(st, f, d, nd.column(d));
    gam_detail::refresh_residuals(st, nd.target);
    return g;
}

namespace gam_detail {

inline void record_losses(GamModel& m, const BoostState& st, const Dataset& nd) {
    const std::size_t n = nd.rows();
    const auto raw_y = nd.raw_targets();
    double sse = 0.0;
    double wsse = 0.0;
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = m.norm.target_inverse(row_sum(st.contrib, static_cast<Eigen::Index>(i)));
        const double e = raw_y[i] - pred;
        sse += e * e;
        wsse += nd.weights[i] * st.residuals[i] * st.residuals[i];
        wsum += nd.weights[i];
    }
    m.meta.loss_trace.push_back(sse / static_cast<double>(n));
    m.meta.weighted_loss_trace.push_back(wsse / wsum);
}

inline void set_display_offsets(GamModel& m, const BoostState& st, const Dataset& nd) {
    double wsum = 0.0;
    for (double w : nd.weights) wsum += w;
    double total = 0.0;
    for (std::size_t d = 0; d < m.shapes.size(); ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < nd.rows(); ++i) {
            s += nd.weights[i] * st.contrib(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
        }
        m.shapes[d].offset = s / wsum;
        total += m.shapes[d].offset;
    }
    m.display_intercept = m.norm.target_inverse(total);
}

} // namespace gam_detail

/// T rounds of cyclic boosting on an already-normalized dataset, starting from
/// `init`. Constrained shapes are projected once before the first round so the
/// blended updates start from a feasible point.
inline GamModel boost(InitResult init, const Dataset& nd, std::span<const ConstraintSpec> constraints) {
    GamModel& m = init.model;
    BoostState& st = init.state;
    const TrainConfig& cfg = m.config;
    m.constraints.assign(constraints.begin(), constraints.end());
    std::vector<std::vector<ActiveConstraint>> per_feature(m.shapes.size());
    for (std::size_t d = 0; d < m.shapes.size(); ++d) {
        per_feature[d] = active_constraints(m, constraints, d);
        if (!per_feature[d].empty()) {
            auto& f = m.shapes[d];
            const auto p = project_shape(f, f.values, per_feature[d]);
            if (p != f.values) f.values = p;
        }
        gam_detail::refresh_contrib(st, m.shapes[d], d, nd.column(d));
    }
    gam_detail::refresh_residuals(st, nd.target);
    m.meta = {};
    m.meta.rows = nd.rows();
    gam_detail::record_losses(m, st, nd);
    for (st.round = 1; st.round <= cfg.rounds; ++st.round) {
        for (std::size_t d = 0; d < m.shapes.size(); ++d) boost_feature(st, d, m, cfg, nd, per_feature[d]);
        gam_detail::record_losses(m, st, nd);
    }
    gam_detail::set_display_offsets(m, st, nd);
    return std::move(m);
}

/// Normalizes `d` with statistics fitted on all of its rows and trains from
/// the zero model. With cfg.warm_start and a `previous` model of the same
/// schema, training continues from its shapes, anchors and normalization.
inline GamModel train(const Dataset& d, const TrainConfig& cfg, std::span<const ConstraintSpec> constraints = {},
                      const GamModel* previous = nullptr) {
    validate(cfg);
    validate(d);
    if (cfg.warm_start && previous) {
        gam_detail::check_schema(*previous, d.cols());
        const Dataset nd = apply_normalization(d, previous->norm);
        InitResult init;
        init.model = *previous;
        init.model.config = cfg;
        BoostState& st = init.state;
        const std::size_t n = nd.rows();
        st.sorted.resize(d.cols());
        st.segments.resize(d.cols());
        st.contrib = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.cols()));
        for (std::size_t j = 0; j < d.cols(); ++j) {
            const auto& f = init.model.shapes[j];
            const auto x = nd.column(j);
            if (f.size() >= 2) {
                pla::ThresholdGrid grid{std::vector<double>(f.anchors.begin() + 1, f.anchors.end() - 1)};
                st.sorted[j] = pla::sort_feature(x, nd.weights, std::move(grid));
            }
            st.segments[j].resize(n);
            for (std::size_t i = 0; i < n; ++i) st.segments[j][i] = f.segment(x[i]);
        }
        st.residuals.assign(n, 0.0);
        return boost(std::move(init), nd, constraints);
    }
    if (d.rows() < 2) throw ValidationError("training needs at least 2 rows");
    const NormStats norm = fit_normalization(d, cfg.standardize_target);
    const Dataset nd = apply_normalization(d, norm);
    return boost(init_model(nd, norm, cfg), nd, constraints);
}

/// Sum of shape contributions for raw feature rows (N x D), in normalized
/// target units.
inline std::vector<double> predict_normalized(const GamModel& m, const Eigen::MatrixXd& raw_rows) {
    gam_detail::check_schema(m, static_cast<std::size_t>(raw_rows.cols()));
    std::vector<double> out(static_cast<std::size_t>(raw_rows.rows()));
    for (Eigen::Index i = 0; i < raw_rows.rows(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < m.shapes.size(); ++d) {
            s += m.shapes[d](m.norm.features[d].forward(raw_rows(i, static_cast<Eigen::Index>(d))));
        }
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

/// Predictions in raw target units for raw feature rows.
inline std::vector<double> predict(const GamModel& m, const Eigen::MatrixXd& raw_rows) {
    auto out = predict_normalized(m, raw_rows);
    for (double& v : out) v = m.norm.target_inverse(v);
    return out;
}

inline std::vector<double> predict(const GamModel& m, const Dataset& d) {
    return predict(m, d.normalized ? d.raw_features : d.features);
}

/// Shape of one feature as shown to a user.
struct ShapeView {
    std::string feature;
    std::vector<double> anchors;
    std::vector<double> values;
    double left_slope = 0.0;  // d value / d anchor below the first anchor
    double right_slope = 0.0; // above the last anchor
    double offset = 0.0;      // subtracted from values when centered
};

/// Anchors and values of feature d. In raw units anchors are mapped back
/// through the feature statistics and values scaled to target units. When
/// centered, values are shifted by the training offset already folded into
/// display_intercept, so sum_d shape_d(x) + display_intercept still equals
/// the prediction.
inline ShapeView shape_values(const GamModel& m, std::size_t d, bool in_raw_units, bool centered = false) {
    if (d >= m.shapes.size()) throw ConfigurationError("feature index " + std::to_string(d) + " out of range");
    const ShapeFunction& f = m.shapes[d];
    ShapeView v;
    v.feature = m.feature_names[d];
    v.anchors = f.anchors;
    v.values = f.values;
    v.left_slope = f.left_slope();
    v.right_slope = f.right_slope();
    v.offset = centered ? f.offset : 0.0;
    for (double& y : v.values) y -= v.offset;
    if (in_raw_units) {
        const ColumnStats& xs = m.norm.features[d];
        const double ys = m.norm.target_scale();
        for (double& a : v.anchors) a = xs.inverse(a);
        for (double& y : v.values) y *= ys;
        v.offset *= ys;
        v.left_slope *= ys / xs.scale;
        v.right_slope *= ys / xs.scale;
    }
    return v;
}

/// Training-data histogram over anchor-aligned bins [a_j, a_{j+1}); the last
/// bin is closed and values outside the range fall into the edge bins.
struct DensityProfile {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> mass;
};

inline DensityProfile density_profile(std::span<const double> anchors, std::span<const double> x) {
    DensityProfile p;
    p.edges.assign(anchors.begin(), anchors.end());
    const std::size_t bins = anchors.size() < 2 ? 1 : anchors.size() - 1;
    p.counts.assign(bins, 0);
    for (double v : x) {
        std::size_t k = 0;
        if (anchors.size() >= 2) {
            const auto it = std::upper_bound(anchors.begin(), anchors.end(), v);
            k = it == anchors.begin() ? 0 : static_cast<std::size_t>(it - anchors.begin()) - 1;
            k = std::min(k, bins - 1);
        }
        ++p.counts[k];
    }
    p.mass.resize(bins, 0.0);
    if (!x.empty()) {
        for (std::size_t k = 0; k < bins; ++k) p.mass[k] = static_cast<double>(p.counts[k]) / static_cast<double>(x.size());
    }
    return p;
}

} // namespace igam
