#pragma once

// Model files: a JSON document tagged {"format": "igam-model", "version": 1}.
// Doubles are written with round-trip precision, so a loaded model predicts
// bit-identically.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "igam/gam.hpp"

namespace igam {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatTag = "igam-model";

using json = nlohmann::json;

inline json to_json(const TrainConfig& c) {
    return {{"lambda", c.lambda},       {"k_basis", c.k_basis},     {"step", c.step},
            {"rounds", c.rounds},       {"alpha", c.alpha},         {"grid_size", c.grid_size},
            {"pairwise", c.pairwise},   {"standardize_target", c.standardize_target},
            {"seed", c.seed},           {"warm_start", c.warm_start}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
    if (!j.is_object()) throw ConfigurationError("config must be an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "lambda") c.lambda = v.get<double>();
            else if (key == "k_basis") c.k_basis = v.get<std::size_t>();
            else if (key == "step") c.step = v.get<double>();
            else if (key == "rounds") c.rounds = v.get<std::size_t>();
            else if (key == "alpha") c.alpha = v.get<double>();
            else if (key == "grid_size") c.grid_size = v.get<std::size_t>();
            else if (key == "pairwise") c.pairwise = v.get<bool>();
            else if (key == "standardize_target") c.standardize_target = v.get<bool>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "warm_start") c.warm_start = v.get<bool>();
            else throw ConfigurationError("unknown config key '" + key + "'");
        } catch (const json::exception&) {
            throw ValidationError("config key '" + key + "' has the wrong type");
        }
    }
    return c;
}

inline json to_json(const ConstraintSpec& c) {
    return {{"id", c.id},   {"feature", c.feature}, {"kind", to_string(c.kind)},
            {"lo", c.lo},   {"hi", c.hi},           {"created_at", c.created_at}};
}

inline ConstraintSpec constraint_from_json(const json& j) {
    ConstraintSpec c;
    c.id = j.at("id").get<std::string>();
    c.feature = j.at("feature").get<std::size_t>();
    c.kind = parse_constraint_kind(j.at("kind").get<std::string>());
    c.lo = j.at("lo").get<double>();
    c.hi = j.at("hi").get<double>();
    c.created_at = j.value("created_at", std::int64_t{0});
    return c;
}

namespace io_detail {

inline json stats_json(const ColumnStats& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

inline ColumnStats stats_from(const json& j) { return {j.at("mean").get<double>(), j.at("scale").get<double>()}; }

} // namespace io_detail

inline json to_json(const GamModel& m) {
    json features = json::array();
    for (std::size_t d = 0; d < m.shapes.size(); ++d) {
        features.push_back({{"name", m.feature_names[d]},
                            {"norm", io_detail::stats_json(m.norm.features[d])},
                            {"anchors", m.shapes[d].anchors},
                            {"values", m.shapes[d].values},
                            {"offset", m.shapes[d].offset}});
    }
    json constraints = json::array();
    for (const auto& c : m.constraints) constraints.push_back(to_json(c));
    return {{"format", kModelFormatTag},
            {"version", kModelFormatVersion},
            {"config", to_json(m.config)},
            {"target", {{"name", m.target_name},
                        {"norm", m.norm.target ? io_detail::stats_json(*m.norm.target) : json(nullptr)}}},
            {"features", features},
            {"constraints", constraints},
            {"display_intercept", m.display_intercept},
            {"training", {{"rows", m.meta.rows},
                          {"loss_trace", m.meta.loss_trace},
                          {"weighted_loss_trace", m.meta.weighted_loss_trace}}}};
}

inline GamModel model_from_json(const json& j) {
    if (!j.is_object() || j.value("format", std::string()) != kModelFormatTag) {
        throw FormatError("not a model document (missing format tag)");
    }
    if (!j.contains("version") || !j.at("version").is_number_integer()) throw FormatError("model version missing");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
        throw VersionError("unsupported model version " + std::to_string(version) + " (this build reads version " +
                           std::to_string(kModelFormatVersion) + ")");
    }
    try {
        GamModel m;
        m.config = train_config_from_json(j.at("config"));
        const json& target = j.at("target");
        m.target_name = target.at("name").get<std::string>();
        if (!target.at("norm").is_null()) m.norm.target = io_detail::stats_from(target.at("norm"));
        for (const auto& f : j.at("features")) {
            m.feature_names.push_back(f.at("name").get<std::string>());
            m.norm.features.push_back(io_detail::stats_from(f.at("norm")));
            ShapeFunction s;
            s.anchors = f.at("anchors").get<std::vector<double>>();
            s.values = f.at("values").get<std::vector<double>>();
            s.offset = f.at("offset").get<double>();
            if (s.anchors.empty() || s.anchors.size() != s.values.size()) {
                throw FormatError("feature '" + m.feature_names.back() + "': anchors and values differ in length");
            }
            for (std::size_t k = 1; k < s.anchors.size(); ++k) {
                if (!(s.anchors[k] > s.anchors[k - 1])) {
                    throw FormatError("feature '" + m.feature_names.back() + "': anchors not strictly increasing");
                }
            }
            m.shapes.push_back(std::move(s));
        }
        for (const auto& c : j.at("constraints")) m.constraints.push_back(constraint_from_json(c));
        m.display_intercept = j.at("display_intercept").get<double>();
        const json& t = j.at("training");
        m.meta.rows = t.at("rows").get<std::size_t>();
        m.meta.loss_trace = t.at("loss_trace").get<std::vector<double>>();
        m.meta.weighted_loss_trace = t.at("weighted_loss_trace").get<std::vector<double>>();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("corrupt model document: ") + e.what());
    } catch (const ValidationError& e) {
        throw FormatError(std::string("corrupt model document: ") + e.what());
    } catch (const ConfigurationError& e) {
        throw FormatError(std::string("corrupt model document: ") + e.what());
    }
}

inline std::string save_model(const GamModel& m) { return to_json(m).dump(1) + "\n"; }

inline GamModel load_model(std::string_view bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("cannot decode model: ") + e.what());
    }
    return model_from_json(j);
}

inline void save_model_file(const GamModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigurationError("cannot write model file: " + path);
    out << save_model(m);
    if (!out) throw ConfigurationError("cannot write model file: " + path);
}

inline GamModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigurationError("model not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

} // namespace igam
