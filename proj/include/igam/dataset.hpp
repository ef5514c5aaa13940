#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "igam/csv.hpp"
#include "igam/error.hpp"

namespace igam {

/// Tabular regression data: N rows, D real-valued features, one target and a
/// strictly positive weight per row.
///
/// After apply_normalization() the `features`/`target` members hold the
/// transformed values and `raw_features`/`raw_target` keep the ingested
/// values for display in original units.
struct Dataset {
    Eigen::MatrixXd features; // N x D, column-major so each feature is contiguous
    std::vector<double> target;
    std::vector<double> weights;
    std::vector<std::string> feature_names;
    std::string target_name;
    std::vector<std::string> row_ids; // empty or N entries

    Eigen::MatrixXd raw_features;
    std::vector<double> raw_target;
    bool normalized = false;

    std::size_t rows() const { return target.size(); }
    std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }

    std::span<const double> column(std::size_t d) const {
        return {features.col(static_cast<Eigen::Index>(d)).data(), rows()};
    }

    std::span<const double> raw_column(std::size_t d) const {
        const Eigen::MatrixXd& src = normalized ? raw_features : features;
        return {src.col(static_cast<Eigen::Index>(d)).data(), rows()};
    }

    std::span<const double> raw_targets() const { return normalized ? raw_target : target; }

    std::ptrdiff_t feature_index(std::string_view name) const {
        for (std::size_t d = 0; d < feature_names.size(); ++d) {
            if (feature_names[d] == name) return static_cast<std::ptrdiff_t>(d);
        }
        return -1;
    }
};

inline void validate(const Dataset& d) {
    const std::size_t n = d.rows();
    if (n == 0) throw ValidationError("dataset has no rows");
    if (static_cast<std::size_t>(d.features.rows()) != n || d.weights.size() != n) {
        throw ValidationError("features, target and weights must all have length N");
    }
    if (d.feature_names.size() != d.cols()) throw ValidationError("feature_names must have D entries");
    if (!d.row_ids.empty() && d.row_ids.size() != n) throw ValidationError("row_ids must be empty or have N entries");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(d.weights[i] > 0.0) || !std::isfinite(d.weights[i])) {
            throw ValidationError("weight at row " + std::to_string(i + 1) + " is not strictly positive");
        }
    }
}

struct CsvColumns {
    std::string target;
    std::optional<std::string> weight;
    std::optional<std::string> id;
};

/// Builds a Dataset from CSV text. Every column other than target/weight/id
/// becomes a feature, in header order. Row numbers in errors count data rows
/// from 1.
inline Dataset parse_dataset(std::string_view text, const CsvColumns& spec) {
    const csv::Table table = csv::parse(text);
    if (table.header.empty()) throw IngestionError("empty file: no header row");

    const auto target_col = table.column(spec.target);
    if (target_col < 0) throw ConfigurationError("target column '" + spec.target + "' not in header");
    std::ptrdiff_t weight_col = -1;
    if (spec.weight) {
        weight_col = table.column(*spec.weight);
        if (weight_col < 0) throw ConfigurationError("weight column '" + *spec.weight + "' not in header");
    }
    std::ptrdiff_t id_col = -1;
    if (spec.id) {
        id_col = table.column(*spec.id);
        if (id_col < 0) throw ConfigurationError("id column '" + *spec.id + "' not in header");
    }

    std::vector<std::size_t> feature_cols;
    Dataset d;
    d.target_name = spec.target;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        const auto sj = static_cast<std::ptrdiff_t>(j);
        if (sj == target_col || sj == weight_col || sj == id_col) continue;
        feature_cols.push_back(j);
        d.feature_names.push_back(table.header[j]);
    }

    const std::size_t n = table.rows.size();
    if (n == 0) throw ValidationError("dataset has no rows");
    d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_cols.size()));
    d.target.resize(n);
    d.weights.assign(n, 1.0);
    if (id_col >= 0) d.row_ids.resize(n);

    auto cell = [&](std::size_t r, std::size_t j) {
        double v = 0.0;
        if (!csv::parse_real(table.rows[r][j], v)) {
            throw IngestionError("row " + std::to_string(r + 1) + " column '" + table.header[j] +
                                 "': cannot parse '" + table.rows[r][j] + "' as a finite real");
        }
        return v;
    };

    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            d.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = cell(r, feature_cols[k]);
        }
        d.target[r] = cell(r, static_cast<std::size_t>(target_col));
        if (weight_col >= 0) {
            d.weights[r] = cell(r, static_cast<std::size_t>(weight_col));
            if (!(d.weights[r] > 0.0)) {
                throw ValidationError("row " + std::to_string(r + 1) + " column '" + *spec.weight +
                                      "': weight must be strictly positive");
            }
        }
        if (id_col >= 0) d.row_ids[r] = table.rows[r][static_cast<std::size_t>(id_col)];
    }
    return d;
}

inline Dataset load_csv(const std::string& path, const CsvColumns& spec) {
    return parse_dataset(csv::read_file(path), spec);
}

inline Dataset load_csv(const std::string& path, const std::string& target_column,
                        std::optional<std::string> weight_column = std::nullopt) {
    return load_csv(path, CsvColumns{target_column, std::move(weight_column), std::nullopt});
}

/// A feature matrix extracted from CSV by name (prediction input).
struct FeatureTable {
    Eigen::MatrixXd features; // N x D in the requested order
    std::vector<std::string> row_ids;
    std::vector<std::string> unused_columns;
};

inline FeatureTable parse_feature_table(std::string_view text, std::span<const std::string> names,
                                        std::optional<std::string> id_column = std::nullopt) {
    const csv::Table table = csv::parse(text);
    if (table.header.empty() || table.rows.empty()) throw ValidationError("input has no data rows");

    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        const auto j = table.column(name);
        if (j < 0) throw ValidationError("schema mismatch: feature column '" + name + "' missing from input");
        cols.push_back(static_cast<std::size_t>(j));
    }
    std::ptrdiff_t id_col = id_column ? table.column(*id_column) : -1;

    FeatureTable out;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (std::find(cols.begin(), cols.end(), j) == cols.end() && static_cast<std::ptrdiff_t>(j) != id_col) {
            out.unused_columns.push_back(table.header[j]);
        }
    }
    const std::size_t n = table.rows.size();
    out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double v = 0.0;
            if (!csv::parse_real(table.rows[r][cols[k]], v)) {
                throw IngestionError("row " + std::to_string(r + 1) + " column '" + table.header[cols[k]] +
                                     "': cannot parse '" + table.rows[r][cols[k]] + "' as a finite real");
            }
            out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
        }
        out.row_ids.push_back(id_col >= 0 ? table.rows[r][static_cast<std::size_t>(id_col)] : std::to_string(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

struct ColumnStats {
    double mean = 0.0;
    double scale = 1.0;

    double forward(double x) const { return (x - mean) / scale; }
    double inverse(double z) const { return z * scale + mean; }
};

struct NormStats {
    std::vector<ColumnStats> features;
    std::optional<ColumnStats> target;

    double target_forward(double y) const { return target ? target->forward(y) : y; }
    double target_inverse(double z) const { return target ? target->inverse(z) : z; }
    double target_scale() const { return target ? target->scale : 1.0; }
};

/// Mean and population standard deviation of `values` restricted to `rows`.
/// Columns whose spread is negligible relative to their magnitude get scale 1.
inline ColumnStats column_stats(std::span<const double> values, std::span<const std::size_t> rows) {
    const double n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (auto i : rows) mean += values[i];
    mean /= n;
    double ss = 0.0;
    for (auto i : rows) {
        const double dv = values[i] - mean;
        ss += dv * dv;
    }
    const double sd = std::sqrt(ss / n);
    ColumnStats s{mean, sd};
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) s.scale = 1.0;
    return s;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

/// Fits z-score statistics on the given rows (all rows by default). Reads the
/// raw values even when `d` was already normalized.
inline NormStats fit_normalization(const Dataset& d, bool standardize_target,
                                   std::span<const std::size_t> rows) {
    if (rows.size() < 2) throw ValidationError("normalization needs at least 2 rows");
    NormStats s;
    for (std::size_t j = 0; j < d.cols(); ++j) s.features.push_back(column_stats(d.raw_column(j), rows));
    if (standardize_target) s.target = column_stats(d.raw_targets(), rows);
    return s;
}

inline NormStats fit_normalization(const Dataset& d, bool standardize_target) {
    const auto rows = all_rows(d.rows());
    return fit_normalization(d, standardize_target, rows);
}

inline Dataset apply_normalization(const Dataset& d, const NormStats& s) {
    if (s.features.size() != d.cols()) {
        throw ValidationError("schema mismatch: stats have " + std::to_string(s.features.size()) +
                              " features, dataset has " + std::to_string(d.cols()));
    }
    Dataset out = d;
    if (!d.normalized) {
        out.raw_features = d.features;
        out.raw_target = d.target;
        out.normalized = true;
    }
    const Eigen::Index n = out.raw_features.rows();
    for (std::size_t j = 0; j < s.features.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        for (Eigen::Index i = 0; i < n; ++i) out.features(i, jj) = s.features[j].forward(out.raw_features(i, jj));
    }
    for (std::size_t i = 0; i < out.target.size(); ++i) out.target[i] = s.target_forward(out.raw_target[i]);
    return out;
}

/// Restores raw units; the inverse of apply_normalization.
inline Dataset invert_normalization(const Dataset& d, const NormStats& s) {
    if (s.features.size() != d.cols()) throw ValidationError("schema mismatch");
    Dataset out = d;
    for (std::size_t j = 0; j < s.features.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        for (Eigen::Index i = 0; i < out.features.rows(); ++i) out.features(i, jj) = s.features[j].inverse(d.features(i, jj));
    }
    for (std::size_t i = 0; i < out.target.size(); ++i) out.target[i] = s.target_inverse(d.target[i]);
    out.raw_features.resize(0, 0);
    out.raw_target.clear();
    out.normalized = false;
    return out;
}

/// Row subset, preserving order.
inline Dataset subset(const Dataset& d, std::span<const std::size_t> rows) {
    Dataset out;
    out.feature_names = d.feature_names;
    out.target_name = d.target_name;
    out.normalized = d.normalized;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.features.resize(n, d.features.cols());
    if (d.normalized) out.raw_features.resize(n, d.features.cols());
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
        out.features.row(k) = d.features.row(i);
        if (d.normalized) out.raw_features.row(k) = d.raw_features.row(i);
        out.target.push_back(d.target[static_cast<std::size_t>(i)]);
        out.weights.push_back(d.weights[static_cast<std::size_t>(i)]);
        if (d.normalized) out.raw_target.push_back(d.raw_target[static_cast<std::size_t>(i)]);
        if (!d.row_ids.empty()) out.row_ids.push_back(d.row_ids[static_cast<std::size_t>(i)]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sample weights

inline void multiply_weights_inplace(std::vector<double>& weights, std::span<const std::size_t> rows, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("weight factor must be a finite positive real");
    for (auto i : rows) {
        if (i >= weights.size()) {
            throw ValidationError("row index " + std::to_string(i) + " out of range [0, " +
                                  std::to_string(weights.size()) + ")");
        }
    }
    for (auto i : rows) weights[i] *= factor;
}

inline Dataset multiply_weights(const Dataset& d, std::span<const std::size_t> rows, double factor) {
    Dataset out = d;
    multiply_weights_inplace(out.weights, rows, factor);
    return out;
}

// ---------------------------------------------------------------------------
// Fold plans

struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;

    std::vector<std::size_t> test_rows(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] == fold) out.push_back(i);
        }
        return out;
    }

    std::vector<std::size_t> train_rows(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] != fold) out.push_back(i);
        }
        return out;
    }
};

namespace detail {

// Unbiased draw in [0, bound) from a 64-bit engine; std::uniform_int_distribution
// is implementation-defined, which would make fold plans differ across toolchains.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v = 0;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

} // namespace detail

/// Shuffles rows with a seeded Fisher-Yates pass and deals them round-robin,
/// so fold sizes differ by at most one and the first N mod k folds are larger.
inline FoldPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ValidationError("k must be positive");
    if (k > n) throw ValidationError("k = " + std::to_string(k) + " exceeds row count " + std::to_string(n));
    std::vector<std::size_t> order = all_rows(n);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(detail::bounded(rng, i));
        std::swap(order[i - 1], order[j]);
    }
    FoldPlan plan{k, std::vector<std::size_t>(n)};
    for (std::size_t p = 0; p < n; ++p) plan.assignments[order[p]] = p % k;
    return plan;
}

inline FoldPlan kfold(const Dataset& d, std::size_t k, std::uint64_t seed) { return kfold(d.rows(), k, seed); }

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest representation that reads back to the same double.
inline std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string to_csv(const Dataset& d, std::optional<std::string> id_column = std::nullopt,
                          bool include_weights = false) {
    std::string out;
    if (id_column) out += csv::quote(*id_column) + ",";
    for (const auto& name : d.feature_names) out += csv::quote(name) + ",";
    out += csv::quote(d.target_name.empty() ? std::string("target") : d.target_name);
    if (include_weights) out += ",weight";
    out += "\n";
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (id_column) out += csv::quote(d.row_ids.empty() ? std::to_string(i) : d.row_ids[i]) + ",";
        for (std::size_t j = 0; j < d.cols(); ++j) out += format_real(d.raw_column(j)[i]) + ",";
        out += format_real(d.raw_targets()[i]);
        if (include_weights) out += "," + format_real(d.weights[i]);
        out += "\n";
    }
    return out;
}

} // namespace igam
