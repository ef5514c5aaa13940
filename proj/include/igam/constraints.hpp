#pragma once

// Shape constraints on one feature's anchor values and their approximate
// projections. All four feasible sets are convex, so blending a feasible
// previous shape with a projected candidate stays feasible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "igam/error.hpp"

namespace igam {

enum class ConstraintKind { increase, decrease, convex, concave };

inline std::string_view to_string(ConstraintKind k) {
    switch (k) {
    case ConstraintKind::increase: return "increase";
    case ConstraintKind::decrease: return "decrease";
    case ConstraintKind::convex: return "convex";
    case ConstraintKind::concave: return "concave";
    }
    return "increase";
}

inline ConstraintKind parse_constraint_kind(std::string_view s) {
    if (s == "increase") return ConstraintKind::increase;
    if (s == "decrease") return ConstraintKind::decrease;
    if (s == "convex") return ConstraintKind::convex;
    if (s == "concave") return ConstraintKind::concave;
    throw ValidationError("unknown constraint kind '" + std::string(s) +
                          "' (expected increase | decrease | convex | concave)");
}

/// A user constraint. The range is kept in raw feature units and converted to
/// the model's normalized units only when applied.
struct ConstraintSpec {
    std::size_t feature = 0;
    ConstraintKind kind = ConstraintKind::increase;
    double lo = 0.0;
    double hi = 0.0;
    std::string id;
    std::int64_t created_at = 0; // unix seconds; application order within a feature

    friend bool operator==(const ConstraintSpec&, const ConstraintSpec&) = default;
};

struct ProjectionResult {
    std::vector<double> values;
    bool changed = false;
    double max_displacement = 0.0;
};

namespace constraint_detail {

inline void check_positions(std::span<const double> anchors, std::size_t m) {
    if (anchors.size() != m) throw ValidationError("anchor positions and values differ in length");
    for (std::size_t i = 1; i < m; ++i) {
        if (!(anchors[i] > anchors[i - 1])) {
            throw ValidationError("anchor positions must be strictly increasing (duplicate at index " +
                                  std::to_string(i) + ")");
        }
    }
}

inline std::vector<double> slopes(std::span<const double> v, std::span<const double> anchors) {
    std::vector<double> s(v.size() > 0 ? v.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) s[i] = (v[i + 1] - v[i]) / (anchors[i + 1] - anchors[i]);
    return s;
}

/// Slopes nondecreasing (sign +1) or nonincreasing (-1). Each slope difference
/// may fall short by `tol` * max(1, max |slope|) plus the rounding that
/// computing slopes from the stored values can introduce.
inline bool curvature_ok(std::span<const double> v, std::span<const double> anchors, int sign, double tol) {
    if (v.size() <= 2) return true;
    const auto s = slopes(v, anchors);
    double smax = 1.0;
    double vmax = 0.0;
    for (double x : s) smax = std::max(smax, std::abs(x));
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double rounding =
            4.0 * eps * vmax * (1.0 / (anchors[i] - anchors[i - 1]) + 1.0 / (anchors[i + 1] - anchors[i]));
        if (sign * (s[i] - s[i - 1]) < -(tol * smax + rounding)) return false;
    }
    return true;
}

} // namespace constraint_detail

/// True when v is nondecreasing (`sign` = +1) or nonincreasing (-1).
inline bool is_monotone(std::span<const double> v, int sign, double tol = 0.0) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (sign * (v[i] - v[i - 1]) < -tol) return false;
    }
    return true;
}

/// Average of the tightest nondecreasing majorant (running max) and minorant
/// (suffix running min). Exact fixed point on nondecreasing input.
inline std::vector<double> project_increasing(std::span<const double> v) {
    const std::size_t m = v.size();
    std::vector<double> upper(m);
    std::vector<double> lower(m);
    for (std::size_t i = 0; i < m; ++i) upper[i] = i == 0 ? v[0] : std::max(upper[i - 1], v[i]);
    for (std::size_t i = m; i-- > 0;) lower[i] = i + 1 == m ? v[i] : std::min(lower[i + 1], v[i]);
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = 0.5 * (upper[i] + lower[i]);
    return out;
}

inline std::vector<double> project_decreasing(std::span<const double> v) {
    std::vector<double> rev(v.rbegin(), v.rend());
    auto out = project_increasing(rev);
    std::reverse(out.begin(), out.end());
    return out;
}

namespace constraint_detail {

template <class SlopeProjection>
std::vector<double> project_curvature(std::span<const double> v, std::span<const double> anchors, int sign,
                                      SlopeProjection project_slopes) {
    check_positions(anchors, v.size());
    std::vector<double> out(v.begin(), v.end());
    if (v.size() <= 2) return out;
    if (curvature_ok(v, anchors, sign, 1e-12)) return out;
    const auto s = slopes(v, anchors);
    const auto projected = project_slopes(std::span<const double>(s));
    for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i + 1] = out[i] + projected[i] * (anchors[i + 1] - anchors[i]);
    return out;
}

} // namespace constraint_detail

/// Convex approximation in slope space: project the segment slopes onto the
/// nondecreasing set and re-accumulate from the first value. Input that is
/// already convex (see is_feasible) is returned unchanged.
inline std::vector<double> project_convex(std::span<const double> v, std::span<const double> anchors) {
    return constraint_detail::project_curvature(v, anchors, +1, [](auto s) { return project_increasing(s); });
}

inline std::vector<double> project_concave(std::span<const double> v, std::span<const double> anchors) {
    return constraint_detail::project_curvature(v, anchors, -1, [](auto s) { return project_decreasing(s); });
}

inline std::vector<double> project(ConstraintKind kind, std::span<const double> v, std::span<const double> anchors) {
    switch (kind) {
    case ConstraintKind::increase: return project_increasing(v);
    case ConstraintKind::decrease: return project_decreasing(v);
    case ConstraintKind::convex: return project_convex(v, anchors);
    case ConstraintKind::concave: return project_concave(v, anchors);
    }
    return {v.begin(), v.end()};
}

/// Feasibility with tolerance `tol` on value differences (monotone kinds) or,
/// for curvature kinds, on slope differences scaled by max(1, max |slope|).
inline bool is_feasible(ConstraintKind kind, std::span<const double> v, std::span<const double> anchors,
                        double tol = 1e-12) {
    switch (kind) {
    case ConstraintKind::increase: return is_monotone(v, +1, tol);
    case ConstraintKind::decrease: return is_monotone(v, -1, tol);
    case ConstraintKind::convex:
    case ConstraintKind::concave:
        constraint_detail::check_positions(anchors, v.size());
        return constraint_detail::curvature_ok(v, anchors, kind == ConstraintKind::convex ? +1 : -1, tol);
    }
    return true;
}

/// Index window [first, last) of anchors inside the closed interval [lo, hi]
/// (both in the anchors' units).
struct AnchorWindow {
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t size() const { return last - first; }
};

inline AnchorWindow anchor_window(std::span<const double> anchors, double lo, double hi) {
    const auto b = std::lower_bound(anchors.begin(), anchors.end(), lo);
    const auto e = std::upper_bound(anchors.begin(), anchors.end(), hi);
    AnchorWindow w;
    w.first = static_cast<std::size_t>(b - anchors.begin());
    w.last = std::max(w.first, static_cast<std::size_t>(e - anchors.begin()));
    return w;
}

/// Projects only the anchor values inside the window; values outside are
/// copied bit-for-bit. Fewer than 2 anchors in range is an error.
inline ProjectionResult project_window(ConstraintKind kind, std::span<const double> values,
                                       std::span<const double> anchors, AnchorWindow w) {
    if (w.size() < 2) {
        throw ValidationError("constraint range covers " + std::to_string(w.size()) +
                              " anchor(s); at least 2 anchors are needed to constrain a shape");
    }
    ProjectionResult r;
    r.values.assign(values.begin(), values.end());
    const auto sub = project(kind, values.subspan(w.first, w.size()), anchors.subspan(w.first, w.size()));
    for (std::size_t i = 0; i < sub.size(); ++i) {
        const double before = r.values[w.first + i];
        r.values[w.first + i] = sub[i];
        const double dv = std::abs(sub[i] - before);
        if (dv != 0.0) r.changed = true;
        r.max_displacement = std::max(r.max_displacement, dv);
    }
    return r;
}

} // namespace igam
