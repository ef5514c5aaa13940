#pragma once

// Piecewise-linear approximation of weighted (x, r) pairs by greedy sparse
// regression over a hinge / reverse-hinge dictionary.
//
// The dictionary A = [1, A^h, A^r] is never materialized for selection: with
// the samples sorted by x, the weighted column norms a^T W a and correlations
// b^T W a of all 2L threshold columns follow from running suffix/prefix sums
// in O(N + L). Only the few selected columns are built explicitly, for the
// ridge-regularized refit.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "igam/error.hpp"

namespace igam::pla {

struct ThresholdGrid {
    std::vector<double> thresholds; // strictly increasing, strictly inside (min x, max x)

    std::size_t size() const { return thresholds.size(); }
    bool empty() const { return thresholds.empty(); }
};

/// Empirical quantiles at ranks l/(L+1), l = 1..L, interpolated linearly
/// between order statistics, deduplicated, and restricted to the open
/// interval (min, max).
inline ThresholdGrid build_threshold_grid(std::span<const double> values, std::size_t levels) {
    if (values.size() < 2) throw ValidationError("threshold grid needs at least 2 values");
    if (levels == 0) throw ValidationError("grid size must be positive");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    if (!(lo < hi)) throw ValidationError("constant feature: all values identical");

    const double last = static_cast<double>(sorted.size() - 1);
    ThresholdGrid grid;
    grid.thresholds.reserve(levels);
    for (std::size_t l = 1; l <= levels; ++l) {
        const double pos = static_cast<double>(l) / static_cast<double>(levels + 1) * last;
        const auto k = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(k);
        double q = sorted[k];
        if (frac > 0.0 && k + 1 < sorted.size()) q = sorted[k] + frac * (sorted[k + 1] - sorted[k]);
        if (!(q > lo && q < hi)) continue;
        if (!grid.thresholds.empty() && !(q > grid.thresholds.back())) continue;
        grid.thresholds.push_back(q);
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Piecewise-linear increment

struct HingeTerm {
    double threshold = 0.0;
    double weight = 0.0;

    friend bool operator==(const HingeTerm&, const HingeTerm&) = default;
};

inline double hinge(double x, double eta) { return x > eta ? x - eta : 0.0; }
inline double reverse_hinge(double x, double eta) { return x < eta ? eta - x : 0.0; }

/// g(x) = c + sum phi_l max(x - eta_l, 0) + sum phi^r_l (-min(x - eta_l, 0)).
struct PiecewiseLinearFn {
    double intercept = 0.0;
    std::vector<HingeTerm> hinges;
    std::vector<HingeTerm> reverse_hinges;

    double operator()(double x) const {
        double g = intercept;
        for (const auto& t : hinges) g += t.weight * hinge(x, t.threshold);
        for (const auto& t : reverse_hinges) g += t.weight * reverse_hinge(x, t.threshold);
        return g;
    }

    std::size_t term_count() const { return hinges.size() + reverse_hinges.size(); }

    bool is_zero() const {
        if (intercept != 0.0) return false;
        for (const auto& t : hinges) {
            if (t.weight != 0.0) return false;
        }
        for (const auto& t : reverse_hinges) {
            if (t.weight != 0.0) return false;
        }
        return true;
    }
};

inline double evaluate(const PiecewiseLinearFn& g, double x) { return g(x); }

// ---------------------------------------------------------------------------
// Linear-time selection statistics

/// Per-threshold quantities for the hinge and the reverse-hinge column.
struct ColumnStats {
    std::vector<double> hinge;
    std::vector<double> reverse;
};

/// Split positions of the sorted data: breakpoints[l] is the leftmost k with
/// x[k] >= eta_l, so the hinge column of threshold l is supported on
/// [breakpoints[l], N) and the reverse hinge on [0, breakpoints[l]).
struct PrefixStats {
    std::vector<std::size_t> breakpoints;
};

inline std::vector<std::size_t> breakpoints(std::span<const double> x_sorted, const ThresholdGrid& grid) {
    std::vector<std::size_t> out(grid.size());
    auto it = x_sorted.begin();
    for (std::size_t l = 0; l < grid.size(); ++l) {
        it = std::lower_bound(it, x_sorted.end(), grid.thresholds[l]);
        out[l] = static_cast<std::size_t>(it - x_sorted.begin());
    }
    return out;
}

inline PrefixStats prefix_stats(std::span<const double> x_sorted, const ThresholdGrid& grid) {
    assert(std::is_sorted(x_sorted.begin(), x_sorted.end()));
    return {breakpoints(x_sorted, grid)};
}

// Both kernels sweep the thresholds once in each direction. Moving from one
// threshold to the next by delta shifts every running sum in closed form,
//   sum w (x - eta + delta)^2 = S + 2 delta P + delta^2 W,
// and the samples crossed on the way are added with their own offsets, so
// the sums of w (x - eta)^k never expand around a distant origin.

/// a^T W a for every hinge and reverse-hinge column. Input sorted ascending
/// by x. Every update adds nonnegative terms.
inline ColumnStats weighted_norms(std::span<const double> x_sorted, std::span<const double> w_sorted,
                                  const ThresholdGrid& grid, std::span<const std::size_t> bp) {
    assert(std::is_sorted(x_sorted.begin(), x_sorted.end()));
    assert(x_sorted.size() == w_sorted.size());
    const std::size_t n = x_sorted.size();
    const std::size_t levels = grid.size();
    ColumnStats out{std::vector<double>(levels), std::vector<double>(levels)};

    double s = 0.0; // sum w (x - eta)^2 over the support
    double p = 0.0; // sum w |x - eta|
    double sw = 0.0;
    std::size_t k = n;
    for (std::size_t l = levels; l-- > 0;) {
        const double eta = grid.thresholds[l];
        if (l + 1 < levels) {
            const double delta = grid.thresholds[l + 1] - eta;
            s += delta * (2.0 * p + delta * sw);
            p += delta * sw;
        }
        for (; k > bp[l]; --k) {
            const double d = x_sorted[k - 1] - eta;
            const double wd = w_sorted[k - 1] * d;
            s += wd * d;
            p += wd;
            sw += w_sorted[k - 1];
        }
        out.hinge[l] = s;
    }
    s = p = sw = 0.0;
    k = 0;
    for (std::size_t l = 0; l < levels; ++l) {
        const double eta = grid.thresholds[l];
        if (l > 0) {
            const double delta = eta - grid.thresholds[l - 1];
            s += delta * (2.0 * p + delta * sw);
            p += delta * sw;
        }
        for (; k < bp[l]; ++k) {
            const double d = eta - x_sorted[k];
            const double wd = w_sorted[k] * d;
            s += wd * d;
            p += wd;
            sw += w_sorted[k];
        }
        out.reverse[l] = s;
    }
    return out;
}

inline ColumnStats weighted_norms(std::span<const double> x_sorted, std::span<const double> w_sorted,
                                  const ThresholdGrid& grid) {
    return weighted_norms(x_sorted, w_sorted, grid, breakpoints(x_sorted, grid));
}

/// b^T W a for every hinge and reverse-hinge column. Input sorted ascending
/// by x; `bp` are the breakpoints of `grid` on `x_sorted`.
inline ColumnStats weighted_correlations(std::span<const double> x_sorted, std::span<const double> b_sorted,
                                         std::span<const double> w_sorted, const ThresholdGrid& grid,
                                         std::span<const std::size_t> bp) {
    assert(std::is_sorted(x_sorted.begin(), x_sorted.end()));
    const std::size_t n = x_sorted.size();
    const std::size_t levels = grid.size();
    ColumnStats out{std::vector<double>(levels), std::vector<double>(levels)};

    double c = 0.0;  // sum w b |x - eta| over the support
    double sb = 0.0; // sum w b
    std::size_t k = n;
    for (std::size_t l = levels; l-- > 0;) {
        const double eta = grid.thresholds[l];
        if (l + 1 < levels) c += (grid.thresholds[l + 1] - eta) * sb;
        for (; k > bp[l]; --k) {
            const double wb = w_sorted[k - 1] * b_sorted[k - 1];
            c += wb * (x_sorted[k - 1] - eta);
            sb += wb;
        }
        out.hinge[l] = c;
    }
    c = sb = 0.0;
    k = 0;
    for (std::size_t l = 0; l < levels; ++l) {
        const double eta = grid.thresholds[l];
        if (l > 0) c += (eta - grid.thresholds[l - 1]) * sb;
        for (; k < bp[l]; ++k) {
            const double wb = w_sorted[k] * b_sorted[k];
            c += wb * (eta - x_sorted[k]);
            sb += wb;
        }
        out.reverse[l] = c;
    }
    return out;
}

inline ColumnStats weighted_correlations(std::span<const double> x_sorted, std::span<const double> b_sorted,
                                         std::span<const double> w_sorted, const ThresholdGrid& grid) {
    return weighted_correlations(x_sorted, b_sorted, w_sorted, grid, breakpoints(x_sorted, grid));
}

// ---------------------------------------------------------------------------
// Column bookkeeping for A = [1, A^h, A^r]

/// Column index layout: 0 is the constant, 1..L the hinges, L+1..2L the
/// reverse hinges (threshold l maps to 1 + l and 1 + L + l).
struct ColumnId {
    enum class Kind { constant, hinge, reverse } kind = Kind::constant;
    std::size_t threshold = 0;

    std::size_t index(std::size_t levels) const {
        switch (kind) {
        case Kind::constant: return 0;
        case Kind::hinge: return 1 + threshold;
        case Kind::reverse: return 1 + levels + threshold;
        }
        return 0;
    }

    static ColumnId from_index(std::size_t index, std::size_t levels) {
        if (index == 0) return {};
        if (index <= levels) return {Kind::hinge, index - 1};
        return {Kind::reverse, index - 1 - levels};
    }

    friend bool operator==(const ColumnId&, const ColumnId&) = default;
};

inline double column_value(const ColumnId& c, const ThresholdGrid& grid, double x) {
    switch (c.kind) {
    case ColumnId::Kind::constant: return 1.0;
    case ColumnId::Kind::hinge: return hinge(x, grid.thresholds[c.threshold]);
    case ColumnId::Kind::reverse: return reverse_hinge(x, grid.thresholds[c.threshold]);
    }
    return 0.0;
}

/// Selection score of one column: the decrease of N times the regularized
/// objective when the column joins with its optimal coefficient,
/// (b^T W a)^2 / (a^T W a + lambda N).
inline double selection_score(double correlation, double norm, double ridge) {
    const double den = norm + ridge;
    if (!(den > 0.0)) return 0.0;
    return correlation * correlation / den;
}

struct Selection {
    std::size_t index = 0; // column index, or threshold index in pairwise mode
    double score = 0.0;
};

/// Picks the best unselected candidate. `taken` has 2L+1 entries indexed like
/// ColumnId::index. In pairwise mode a threshold is a candidate when neither of
/// its columns is taken, and its score is the sum of both column scores.
/// Ties go to the lowest index. Returns nullopt when no candidate scores above
/// `min_score` (the round is a no-op).
inline std::optional<Selection> select_basis(const ColumnStats& norms, const ColumnStats& correlations,
                                             const std::vector<bool>& taken, double ridge, bool pairwise,
                                             double min_score = 0.0) {
    const std::size_t levels = norms.hinge.size();
    assert(taken.size() == 2 * levels + 1);
    std::optional<Selection> best;
    auto consider = [&](std::size_t index, double score) {
        if (!(score > min_score)) return;
        if (!best || score > best->score) best = Selection{index, score};
    };
    if (pairwise) {
        for (std::size_t l = 0; l < levels; ++l) {
            if (taken[1 + l] || taken[1 + levels + l]) continue;
            consider(l, selection_score(correlations.hinge[l], norms.hinge[l], ridge) +
                            selection_score(correlations.reverse[l], norms.reverse[l], ridge));
        }
    } else {
        for (std::size_t l = 0; l < levels; ++l) {
            if (!taken[1 + l]) consider(1 + l, selection_score(correlations.hinge[l], norms.hinge[l], ridge));
        }
        for (std::size_t l = 0; l < levels; ++l) {
            if (!taken[1 + levels + l]) {
                consider(1 + levels + l, selection_score(correlations.reverse[l], norms.reverse[l], ridge));
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Ridge refit

/// Solves (G + ridge I) q = rhs for a symmetric positive semidefinite Gram
/// matrix G. Without ridge a rank-deficient G is reported instead of guessed.
inline Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, double ridge) {
    const Eigen::Index m = gram.rows();
    Eigen::MatrixXd system = gram;
    system.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    const double scale = std::max(system.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                          ldlt.vectorD().minCoeff() <= 1e-12 * scale;
    if (singular) {
        throw SolverError("singular normal equations (" + std::to_string(m) +
                          " columns); use lambda > 0 to regularize the refit");
    }
    return ldlt.solve(rhs);
}

/// q solving (A^T W A + lambda N I) q = A^T W r, with A given column by column.
inline Eigen::VectorXd solve_weights(const Eigen::MatrixXd& columns, std::span<const double> r,
                                     std::span<const double> w, double lambda, std::size_t n) {
    if (columns.cols() < 1) throw ValidationError("solve_weights needs at least one column");
    if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::MatrixXd weighted = wv.asDiagonal() * columns;
    const Eigen::MatrixXd gram = columns.transpose() * weighted;
    const Eigen::VectorXd rhs = weighted.transpose() * rv;
    return solve_normal_equations(gram, rhs, lambda * static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Sorted view of one feature, reusable across boosting rounds while the
// feature values and the sample weights stay fixed.

struct SortedFeature {
    ThresholdGrid grid;
    std::vector<std::size_t> order; // order[k]: original row of the k-th smallest x (stable)
    std::vector<double> x;
    std::vector<double> w;
    PrefixStats stats;
    ColumnStats norms;

    std::size_t rows() const { return x.size(); }
};

inline SortedFeature sort_feature(std::span<const double> x, std::span<const double> w, ThresholdGrid grid) {
    if (x.size() != w.size()) throw ValidationError("x and w lengths differ");
    SortedFeature f;
    f.grid = std::move(grid);
    f.order.resize(x.size());
    std::iota(f.order.begin(), f.order.end(), std::size_t{0});
    std::stable_sort(f.order.begin(), f.order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    f.x.resize(x.size());
    f.w.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        f.x[k] = x[f.order[k]];
        f.w[k] = w[f.order[k]];
    }
    f.stats = prefix_stats(f.x, f.grid);
    f.norms = weighted_norms(f.x, f.w, f.grid, f.stats.breakpoints);
    return f;
}

struct FitOptions {
    double lambda = 1.0;
    std::size_t max_basis = 7; // K: columns (single) or thresholds (pairwise), constant excluded
    bool pairwise = true;
};

struct SelectionState {
    std::vector<ColumnId> selected; // Gamma, constant first
    Eigen::VectorXd coeffs;         // q_Gamma aligned with `selected`
    std::vector<double> residual;   // b = r - A_Gamma q_Gamma, in sorted order
    std::vector<double> objective_trace;
};

struct FitResult {
    PiecewiseLinearFn fn;
    SelectionState state;
};

namespace detail {

inline double regularized_objective(std::span<const double> b, std::span<const double> w, const Eigen::VectorXd& q,
                                    double lambda) {
    double sse = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) sse += w[k] * b[k] * b[k];
    return sse / static_cast<double>(b.size()) + lambda * q.squaredNorm();
}

} // namespace detail

/// Greedy OMP over [1, A^h, A^r] with the constant column pre-seeded. `r` is
/// in original row order. Each round scores all threshold columns in O(N + L),
/// adds the winner (or the winning hinge pair), and jointly refits every
/// selected coefficient by ridge least squares.
inline FitResult fit_pla(const SortedFeature& f, std::span<const double> r, const FitOptions& opt) {
    const std::size_t n = f.rows();
    if (r.size() != n) throw ValidationError("residual length differs from feature length");
    if (n == 0) throw ValidationError("fit_pla needs at least one row");
    if (opt.lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    const std::size_t levels = f.grid.size();
    const double ridge = opt.lambda * static_cast<double>(n);

    std::vector<double> r_sorted(n);
    for (std::size_t k = 0; k < n; ++k) r_sorted[k] = r[f.order[k]];

    // Selected columns, materialized in sorted order, and their weighted Gram.
    std::vector<std::vector<double>> cols;
    Eigen::MatrixXd gram(0, 0);
    Eigen::VectorXd rhs(0);
    std::vector<bool> taken(2 * levels + 1, false);

    FitResult out;
    SelectionState& st = out.state;

    // Without ridge a column already spanned by the selection (a second hinge
    // pair is, since h + r = x - eta) would make the refit singular; it is
    // marked taken and left out.
    auto add_column = [&](ColumnId id) {
        std::vector<double> a(n);
        for (std::size_t k = 0; k < n; ++k) a[k] = column_value(id, f.grid, f.x[k]);
        const Eigen::Index m = gram.rows();
        Eigen::VectorXd g(m + 1);
        for (Eigen::Index j = 0; j <= m; ++j) {
            const std::vector<double>& other = j < m ? cols[static_cast<std::size_t>(j)] : a;
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += f.w[k] * a[k] * other[k];
            g(j) = s;
        }
        taken[id.index(levels)] = true;
        if (ridge == 0.0 && m > 0) {
            const Eigen::VectorXd cross = g.head(m);
            const double rest = g(m) - cross.dot(gram.ldlt().solve(cross));
            if (!(rest > 1e-10 * g(m))) return;
        }
        gram.conservativeResize(m + 1, m + 1);
        rhs.conservativeResize(m + 1);
        gram.row(m) = g.transpose();
        gram.col(m) = g;
        double c = 0.0;
        for (std::size_t k = 0; k < n; ++k) c += f.w[k] * a[k] * r_sorted[k];
        rhs(m) = c;
        cols.push_back(std::move(a));
        st.selected.push_back(id);
    };

    auto refit = [&] {
        st.coeffs = solve_normal_equations(gram, rhs, ridge);
        st.residual = r_sorted;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double q = st.coeffs(static_cast<Eigen::Index>(j));
            for (std::size_t k = 0; k < n; ++k) st.residual[k] -= q * cols[j][k];
        }
        st.objective_trace.push_back(detail::regularized_objective(st.residual, f.w, st.coeffs, opt.lambda));
    };

    add_column(ColumnId{});
    refit();

    for (std::size_t round = 0; round < opt.max_basis && levels > 0; ++round) {
        double bwb = 0.0;
        for (std::size_t k = 0; k < n; ++k) bwb += f.w[k] * st.residual[k] * st.residual[k];
        const auto corr = weighted_correlations(f.x, st.residual, f.w, f.grid, f.stats.breakpoints);
        // Reductions below this are rounding noise relative to the current fit.
        const auto pick = select_basis(f.norms, corr, taken, ridge, opt.pairwise, 1e-14 * bwb);
        if (!pick) break;
        if (opt.pairwise) {
            add_column(ColumnId{ColumnId::Kind::hinge, pick->index});
            add_column(ColumnId{ColumnId::Kind::reverse, pick->index});
        } else {
            add_column(ColumnId::from_index(pick->index, levels));
        }
        refit();
    }

    for (std::size_t j = 0; j < st.selected.size(); ++j) {
        const ColumnId& id = st.selected[j];
        const double q = st.coeffs(static_cast<Eigen::Index>(j));
        switch (id.kind) {
        case ColumnId::Kind::constant: out.fn.intercept = q; break;
        case ColumnId::Kind::hinge: out.fn.hinges.push_back({f.grid.thresholds[id.threshold], q}); break;
        case ColumnId::Kind::reverse: out.fn.reverse_hinges.push_back({f.grid.thresholds[id.threshold], q}); break;
        }
    }
    return out;
}

/// Convenience overload on unsorted data.
inline FitResult fit_pla(std::span<const double> x, std::span<const double> r, std::span<const double> w,
                         const ThresholdGrid& grid, const FitOptions& opt) {
    if (x.size() != r.size() || x.size() != w.size()) throw ValidationError("x, r and w lengths differ");
    return fit_pla(sort_feature(x, w, grid), r, opt);
}

} // namespace igam::pla
