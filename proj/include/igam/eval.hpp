#pragma once

// Metrics, k-fold cross-validation and a synthetic electric-load generator.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "igam/dataset.hpp"
#include "igam/gam.hpp"
#include "igam/model_io.hpp"

namespace igam {

inline double mse(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw ValidationError("mse: length mismatch");
    if (y.empty()) throw ValidationError("mse: no rows");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - yhat[i];
        s += e * e;
    }
    return s / static_cast<double>(y.size());
}

/// Root mean squared relative error. Targets must be nonzero.
inline double rnmse(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw ValidationError("rnmse: length mismatch");
    if (y.empty()) throw ValidationError("rnmse: no rows");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) throw ValidationError("rnmse: target is zero at row " + std::to_string(i));
        const double e = (y[i] - yhat[i]) / y[i];
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

struct Metrics {
    double mse = 0.0;
    std::optional<double> rnmse; // absent when some target is zero
};

inline Metrics metrics(std::span<const double> y, std::span<const double> yhat) {
    Metrics m;
    m.mse = mse(y, yhat);
    bool nonzero = true;
    for (double v : y) nonzero = nonzero && v != 0.0;
    if (nonzero) m.rnmse = rnmse(y, yhat);
    return m;
}

/// Metrics restricted to the rows where `mask` is set.
inline Metrics segment_metrics(std::span<const double> y, std::span<const double> yhat, const std::vector<bool>& mask) {
    std::vector<double> a;
    std::vector<double> b;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (mask[i]) {
            a.push_back(y[i]);
            b.push_back(yhat[i]);
        }
    }
    return metrics(a, b);
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldResult {
    std::size_t fold = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    double mse = 0.0;     // standardized target units when the target is standardized
    double mse_raw = 0.0; // raw target units
    std::optional<double> rnmse;
};

struct CvResult {
    std::vector<FoldResult> folds;
    double mean_mse = 0.0;
    double mean_mse_raw = 0.0;
};

/// Trains one model per fold on the other folds (normalization fitted on the
/// training rows only) and scores the held-out rows. With a standardized
/// target, `mse` is expressed in the fold's standardized units.
inline FoldResult evaluate_fold(const Dataset& d, const TrainConfig& cfg, const FoldPlan& plan, std::size_t fold) {
    const auto train_rows = plan.train_rows(fold);
    const auto test_rows = plan.test_rows(fold);
    if (train_rows.size() < 2 || test_rows.empty()) throw ValidationError("fold " + std::to_string(fold) + " is too small");
    const Dataset train_set = subset(d, train_rows);
    const Dataset test_set = subset(d, test_rows);
    const GamModel model = train(train_set, cfg);
    const auto pred = predict(model, test_set);
    const Metrics m = metrics(test_set.raw_targets(), pred);
    const double s = model.norm.target_scale();
    return {fold, train_rows.size(), test_rows.size(), m.mse / (s * s), m.mse, m.rnmse};
}

inline CvResult cross_validate(const Dataset& d, const TrainConfig& cfg, const FoldPlan& plan, bool parallel = true) {
    validate(cfg);
    if (plan.k < 2) throw ValidationError("cross-validation needs k >= 2 folds");
    if (plan.assignments.size() != d.rows()) throw ValidationError("fold plan does not match dataset rows");
    CvResult out;
    out.folds.resize(plan.k);
    if (parallel) {
        std::vector<std::future<FoldResult>> jobs;
        for (std::size_t f = 0; f < plan.k; ++f) {
            jobs.push_back(std::async(std::launch::async, [&, f] { return evaluate_fold(d, cfg, plan, f); }));
        }
        for (std::size_t f = 0; f < plan.k; ++f) out.folds[f] = jobs[f].get();
    } else {
        for (std::size_t f = 0; f < plan.k; ++f) out.folds[f] = evaluate_fold(d, cfg, plan, f);
    }
    for (const auto& f : out.folds) {
        out.mean_mse += f.mse;
        out.mean_mse_raw += f.mse_raw;
    }
    out.mean_mse /= static_cast<double>(plan.k);
    out.mean_mse_raw /= static_cast<double>(plan.k);
    return out;
}

// ---------------------------------------------------------------------------
// Reports

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_hash(const TrainConfig& cfg) { return fnv1a_hex(to_json(cfg).dump()); }

inline nlohmann::json cv_report(const std::string& dataset, const TrainConfig& cfg, const CvResult& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds) {
        nlohmann::json j{{"fold", f.fold}, {"train_rows", f.train_rows}, {"test_rows", f.test_rows},
                         {"mse", f.mse},   {"mse_raw", f.mse_raw}};
        j["rnmse"] = f.rnmse ? nlohmann::json(*f.rnmse) : nlohmann::json(nullptr);
        folds.push_back(std::move(j));
    }
    return {{"dataset", dataset},
            {"config", to_json(cfg)},
            {"config_hash", config_hash(cfg)},
            {"seed", cfg.seed},
            {"folds", folds},
            {"mean_mse", r.mean_mse},
            {"mean_mse_raw", r.mean_mse_raw}};
}

inline std::string cv_table(const std::string& dataset, const CvResult& r) {
    std::string out = "dataset: " + dataset + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %10s %10s %14s %14s\n", "fold", "train", "test", "mse", "mse_raw");
    out += line;
    for (const auto& f : r.folds) {
        std::snprintf(line, sizeof line, "%-6zu %10zu %10zu %14.6g %14.6g\n", f.fold, f.train_rows, f.test_rows, f.mse,
                      f.mse_raw);
        out += line;
    }
    std::snprintf(line, sizeof line, "%-6s %10s %10s %14.6g %14.6g\n", "mean", "", "", r.mean_mse, r.mean_mse_raw);
    out += line;
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic load

struct SyntheticLoad {
    Dataset data;                // features: time_of_day, day_of_week, skin_temperature, lagged_temperature
    std::vector<bool> heat_wave; // per row
};

namespace synth_detail {

// Portable draws: the standard distributions are implementation-defined.
inline double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double normal(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform(rng);
    const double u2 = uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(yoe) + static_cast<int>(era) * 400 + (m <= 2 ? 1 : 0);
}

// Temperature response in MW: convex below 25 C, concave (saturating) above.
inline double temperature_response(double t) {
    constexpr double knee = 25.0;
    if (t <= knee) {
        const double u = std::max(t + 5.0, 0.0) / 30.0;
        return 120.0 * u * u;
    }
    constexpr double slope = 8.0;
    constexpr double tau = 10.0;
    return 120.0 + slope * tau * (1.0 - std::exp(-(t - knee) / tau));
}

inline double daily_profile(double hour) {
    const double morning = std::exp(-0.5 * std::pow((hour - 9.0) / 2.0, 2));
    const double evening = std::exp(-0.5 * std::pow((hour - 19.0) / 2.5, 2));
    const double night = std::exp(-0.5 * std::pow((hour - 3.5) / 2.5, 2));
    return 1.0 + 0.18 * morning + 0.25 * evening - 0.15 * night;
}

} // namespace synth_detail

/// Load series at 15-minute resolution starting 2023-01-01 00:00. Heat waves
/// are rare multi-day summer episodes with a large temperature excess; their
/// extra load builds up with the trailing 24 h mean temperature.
inline SyntheticLoad gen_synthetic_load(std::size_t days, std::uint64_t seed) {
    using namespace synth_detail;
    if (days < 7) throw ValidationError("days must be >= 7");
    constexpr std::size_t per_day = 96;
    constexpr std::int64_t epoch_day = 19358; // 2023-01-01, a Sunday
    const std::size_t n = days * per_day;
    std::mt19937_64 rng(seed);

    std::vector<double> anomaly(days);
    std::vector<double> excess(days, 0.0);
    std::vector<bool> hot_day(days, false);
    double a = 0.0;
    std::size_t remaining = 0;
    for (std::size_t day = 0; day < days; ++day) {
        a = 0.7 * a + 1.8 * normal(rng);
        anomaly[day] = a;
        const double season = 14.0 - 12.0 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(day % 365) - 15.0) / 365.0);
        const double start = uniform(rng);
        const double length = uniform(rng);
        if (remaining == 0 && season > 22.0 && start < 0.03) remaining = 3 + static_cast<std::size_t>(length * 3.0);
        if (remaining > 0) {
            hot_day[day] = true;
            excess[day] = 9.0;
            --remaining;
        }
    }

    SyntheticLoad out;
    Dataset& d = out.data;
    d.feature_names = {"time_of_day", "day_of_week", "skin_temperature", "lagged_temperature"};
    d.target_name = "load";
    d.features.resize(static_cast<Eigen::Index>(n), 4);
    d.target.resize(n);
    d.weights.assign(n, 1.0);
    d.row_ids.resize(n);
    out.heat_wave.resize(n);

    std::vector<double> temp(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t day = i / per_day;
        const double hour = static_cast<double>(i % per_day) * 0.25;
        const double season = 14.0 - 12.0 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(day % 365) - 15.0) / 365.0);
        const double diurnal = 5.0 * std::sin(2.0 * std::numbers::pi * (hour - 9.0) / 24.0);
        temp[i] = season + diurnal + anomaly[day] + excess[day] + 0.3 * normal(rng);
    }

    double window = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        window += temp[i];
        if (i >= per_day) window -= temp[i - per_day];
        const double lagged = window / static_cast<double>(std::min(i + 1, per_day));
        const std::size_t day = i / per_day;
        const double hour = static_cast<double>(i % per_day) * 0.25;
        const auto dow = static_cast<double>((day + 6) % 7); // Monday = 0
        const double weekend = dow >= 5.0 ? 0.88 : 1.0;
        const double accumulated = 7.0 * std::max(lagged - 27.0, 0.0);
        const double load =
            500.0 * daily_profile(hour) * weekend + temperature_response(temp[i]) + accumulated + 6.0 * normal(rng);
        const auto ii = static_cast<Eigen::Index>(i);
        d.features(ii, 0) = hour;
        d.features(ii, 1) = dow;
        d.features(ii, 2) = temp[i];
        d.features(ii, 3) = lagged;
        d.target[i] = load;
        out.heat_wave[i] = hot_day[day];

        int y = 0;
        unsigned mo = 0;
        unsigned dd = 0;
        civil_from_days(epoch_day + static_cast<std::int64_t>(day), y, mo, dd);
        const std::size_t minutes = (i % per_day) * 15;
        char ts[32];
        std::snprintf(ts, sizeof ts, "%04d-%02u-%02uT%02zu:%02zu:00", y, mo, dd, minutes / 60, minutes % 60);
        d.row_ids[i] = ts;
    }
    return out;
}

} // namespace igam
