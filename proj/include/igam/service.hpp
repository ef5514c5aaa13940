#pragma once

// HTTP service for the interactive editing loop: upload data, train, inspect
// predictions and shapes, stage weight edits and constraints, retrain.
//
// Every model lives in a Session guarded by its own mutex. Reads copy a
// shared_ptr to the immutable trained model together with the revision, so a
// reader never sees a half-installed retrain. Training runs on a job thread.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "igam/dataset.hpp"
#include "igam/gam.hpp"
#include "igam/model_io.hpp"

namespace igam::service {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path data_dir = "igam-data";
    std::uint64_t default_seed = 0;

    /// IGAM_BIND (host:port), IGAM_DATA_DIR, IGAM_SEED.
    static Options from_env() {
        Options o;
        if (const char* bind = std::getenv("IGAM_BIND")) {
            const std::string b = bind;
            const auto colon = b.rfind(':');
            if (colon == std::string::npos) throw ConfigurationError("IGAM_BIND must be host:port");
            o.host = b.substr(0, colon);
            o.port = std::stoi(b.substr(colon + 1));
        }
        if (const char* dir = std::getenv("IGAM_DATA_DIR")) o.data_dir = dir;
        if (const char* seed = std::getenv("IGAM_SEED")) o.default_seed = std::stoull(seed);
        return o;
    }
};

enum class JobState { idle, running, failed };

inline std::string_view to_string(JobState s) {
    switch (s) {
    case JobState::idle: return "idle";
    case JobState::running: return "running";
    case JobState::failed: return "failed";
    }
    return "idle";
}

inline JobState parse_job_state(std::string_view s) {
    if (s == "running") return JobState::running;
    if (s == "failed") return JobState::failed;
    return JobState::idle;
}

struct StoredDataset {
    std::string id;
    std::string csv;
    CsvColumns columns;
    Dataset data;
};

struct Session {
    std::mutex mu;
    std::string id;
    std::string dataset_id; // empty for imported models
    TrainConfig config;
    std::vector<double> weights;
    std::vector<ConstraintSpec> constraints;
    std::shared_ptr<const GamModel> model;
    JobState state = JobState::idle;
    std::string message;
    std::uint64_t revision = 0;
    std::uint64_t next_constraint = 1;
    std::thread job;
};

/// An HTTP-level failure.
struct HttpError {
    int status;
    std::string kind;
    std::string message;
};

namespace detail {

inline void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

inline json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw HttpError{400, "format", std::string("request body is not valid JSON: ") + e.what()};
    }
}

template <class T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw HttpError{400, "validation", std::string("missing field '") + key + "'"};
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw HttpError{400, "validation", std::string("field '") + key + "' has the wrong type"};
    }
}

inline bool overlaps(const ConstraintSpec& a, const ConstraintSpec& b) {
    return a.feature == b.feature && a.lo <= b.hi && b.lo <= a.hi;
}

inline bool opposed(ConstraintKind a, ConstraintKind b) {
    using K = ConstraintKind;
    return (a == K::increase && b == K::decrease) || (a == K::decrease && b == K::increase) ||
           (a == K::convex && b == K::concave) || (a == K::concave && b == K::convex);
}

} // namespace detail

class Service {
public:
    explicit Service(Options opt) : opt_(std::move(opt)) {
        fs::create_directories(opt_.data_dir / "datasets");
        fs::create_directories(opt_.data_dir / "models");
        restore();
        routes();
    }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ~Service() {
        stop();
        std::vector<std::shared_ptr<Session>> all;
        {
            std::lock_guard lk(mu_);
            for (auto& [id, s] : sessions_) all.push_back(s);
        }
        for (auto& s : all) {
            std::thread t;
            {
                std::lock_guard lk(s->mu);
                t = std::move(s->job);
            }
            if (t.joinable()) t.join();
        }
    }

    httplib::Server& http() { return server_; }

    /// Binds to opt.port (or any free port when 0) and returns the port.
    int bind() {
        if (opt_.port == 0) {
            port_ = server_.bind_to_any_port(opt_.host);
        } else {
            port_ = server_.bind_to_port(opt_.host, opt_.port) ? opt_.port : -1;
        }
        if (port_ < 0) throw ConfigurationError("cannot bind " + opt_.host + ":" + std::to_string(opt_.port));
        return port_;
    }

    /// Blocks serving requests until stop().
    bool serve() { return server_.listen_after_bind(); }

    void stop() {
        if (server_.is_running()) server_.stop();
    }

    int port() const { return port_; }

    // -- operations, also callable without HTTP --------------------------------

    json create_dataset(const json& body) {
        StoredDataset ds;
        ds.csv = detail::field<std::string>(body, "csv");
        ds.columns.target = detail::field<std::string>(body, "target_column");
        if (body.contains("weight_column") && !body["weight_column"].is_null()) {
            ds.columns.weight = detail::field<std::string>(body, "weight_column");
        }
        if (body.contains("id_column") && !body["id_column"].is_null()) {
            ds.columns.id = detail::field<std::string>(body, "id_column");
        }
        ds.data = parse_dataset(ds.csv, ds.columns);
        validate(ds.data);
        {
            std::lock_guard lk(mu_);
            ds.id = "ds" + std::to_string(next_dataset_++);
        }
        persist_dataset(ds);
        const json out{{"dataset_id", ds.id}, {"rows", ds.data.rows()}, {"features", ds.data.feature_names}};
        std::lock_guard lk(mu_);
        const std::string key = ds.id;
        datasets_[key] = std::make_shared<const StoredDataset>(std::move(ds));
        return out;
    }

    json create_model(const json& body) {
        const auto dataset_id = detail::field<std::string>(body, "dataset_id");
        auto ds = dataset(dataset_id);
        TrainConfig cfg;
        cfg.seed = opt_.default_seed;
        if (body.contains("config")) cfg = train_config_from_json(body["config"], cfg);
        validate(cfg);
        auto s = std::make_shared<Session>();
        s->dataset_id = dataset_id;
        s->config = cfg;
        s->weights = ds->data.weights;
        {
            std::lock_guard lk(mu_);
            s->id = "m" + std::to_string(next_model_++);
            sessions_[s->id] = s;
        }
        std::lock_guard lk(s->mu);
        start_training(s);
        return {{"model_id", s->id}, {"state", to_string(s->state)}, {"revision", s->revision}};
    }

    json get_model(const std::string& id) {
        auto s = session(id);
        std::lock_guard lk(s->mu);
        json out{{"model_id", s->id},
                 {"dataset_id", s->dataset_id},
                 {"state", to_string(s->state)},
                 {"message", s->message},
                 {"revision", s->revision},
                 {"config", to_json(s->config)},
                 {"constraints", constraints_json(*s)}};
        if (s->model) {
            out["features"] = s->model->feature_names;
            out["target"] = s->model->target_name;
            out["rows"] = s->model->meta.rows;
            out["loss_trace"] = s->model->meta.loss_trace;
            out["weighted_loss_trace"] = s->model->meta.weighted_loss_trace;
            out["display_intercept"] = s->model->display_intercept;
        }
        return out;
    }

    json series(const std::string& id, std::optional<std::size_t> from, std::optional<std::size_t> to,
                const std::optional<std::string>& ref_factor) {
        auto s = session(id);
        std::shared_ptr<const GamModel> model;
        std::vector<double> weights;
        std::uint64_t revision = 0;
        {
            std::lock_guard lk(s->mu);
            model = s->model;
            weights = s->weights;
            revision = s->revision;
        }
        if (!model) throw HttpError{409, "state", "model has not finished training"};
        auto ds = session_dataset(*s);
        const Dataset& d = ds->data;
        const std::size_t n = d.rows();
        const std::size_t a = from.value_or(0);
        const std::size_t b = to.value_or(n);
        if (a > b || b > n) {
            throw HttpError{400, "validation", "bad row range [" + std::to_string(a) + ", " + std::to_string(b) +
                                                   ") for " + std::to_string(n) + " rows"};
        }
        std::ptrdiff_t ref = -1;
        if (ref_factor) {
            ref = d.feature_index(*ref_factor);
            if (ref < 0) throw HttpError{400, "validation", "unknown ref_factor '" + *ref_factor + "'"};
        }
        const Eigen::MatrixXd window = d.features.middleRows(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b - a));
        const auto pred = predict(*model, window);
        json out{{"model_id", id},
                 {"revision", revision},
                 {"from", a},
                 {"to", b},
                 {"actual", std::vector<double>(d.target.begin() + static_cast<std::ptrdiff_t>(a),
                                                d.target.begin() + static_cast<std::ptrdiff_t>(b))},
                 {"predicted", pred},
                 {"weights", std::vector<double>(weights.begin() + static_cast<std::ptrdiff_t>(a),
                                                 weights.begin() + static_cast<std::ptrdiff_t>(b))}};
        std::vector<std::string> ids;
        for (std::size_t i = a; i < b; ++i) ids.push_back(d.row_ids.empty() ? std::to_string(i) : d.row_ids[i]);
        out["row_ids"] = ids;
        if (ref >= 0) {
            const auto col = d.column(static_cast<std::size_t>(ref));
            out["ref_factor"] = *ref_factor;
            out["reference"] = std::vector<double>(col.begin() + static_cast<std::ptrdiff_t>(a),
                                                   col.begin() + static_cast<std::ptrdiff_t>(b));
        }
        return out;
    }

    json edit_weights(const std::string& id, const json& body) {
        auto s = session(id);
        const auto op = detail::field<std::string>(body, "op");
        double factor = 0.0;
        if (op == "increase") factor = 2.0;
        else if (op == "decrease") factor = 0.5;
        else throw HttpError{400, "validation", "op must be \"increase\" or \"decrease\""};
        if (!body.contains("rows")) throw HttpError{400, "validation", "missing field 'rows'"};
        const json& rows = body["rows"];
        std::lock_guard lk(s->mu);
        if (s->state == JobState::running) throw HttpError{409, "state", "retrain in progress"};
        if (s->dataset_id.empty()) throw HttpError{409, "state", "imported model has no dataset to edit"};
        const std::size_t n = s->weights.size();
        std::vector<std::size_t> idx;
        if (rows.is_object()) {
            const auto a = detail::field<std::size_t>(rows, "start");
            const auto b = detail::field<std::size_t>(rows, "end");
            if (a > b || b > n) {
                throw HttpError{400, "validation", "rows [" + std::to_string(a) + ", " + std::to_string(b) +
                                                       ") out of range for " + std::to_string(n) + " rows"};
            }
            for (std::size_t i = a; i < b; ++i) idx.push_back(i);
        } else if (rows.is_array()) {
            for (const auto& r : rows) {
                if (!r.is_number_integer() || r.get<std::int64_t>() < 0) {
                    throw HttpError{400, "validation", "rows must be nonnegative integers"};
                }
                idx.push_back(r.get<std::size_t>());
            }
        } else {
            throw HttpError{400, "validation", "rows must be {start, end} or a list of indices"};
        }
        multiply_weights_inplace(s->weights, idx, factor);
        ++s->revision;
        persist_session(*s);
        return {{"model_id", s->id}, {"revision", s->revision}, {"rows_changed", idx.size()}, {"factor", factor}};
    }

    json add_constraint(const std::string& id, const json& body) {
        auto s = session(id);
        std::lock_guard lk(s->mu);
        if (s->state == JobState::running) throw HttpError{409, "state", "retrain in progress"};
        if (!s->model) throw HttpError{409, "state", "model has not finished training"};
        ConstraintSpec c;
        const json& f = body.contains("feature") ? body["feature"] : json();
        if (f.is_string()) {
            const auto k = s->model->feature_index(f.get<std::string>());
            if (k < 0) throw HttpError{400, "validation", "unknown feature '" + f.get<std::string>() + "'"};
            c.feature = static_cast<std::size_t>(k);
        } else if (f.is_number_integer()) {
            c.feature = f.get<std::size_t>();
        } else {
            throw HttpError{400, "validation", "missing field 'feature'"};
        }
        c.kind = parse_constraint_kind(detail::field<std::string>(body, "kind"));
        if (body.contains("range")) {
            const auto r = detail::field<std::vector<double>>(body, "range");
            if (r.size() != 2) throw HttpError{400, "validation", "range must be [lo, hi]"};
            c.lo = r[0];
            c.hi = r[1];
        } else {
            c.lo = detail::field<double>(body, "lo");
            c.hi = detail::field<double>(body, "hi");
        }
        resolve_constraint(*s->model, c); // throws with the anchor count when rejected
        c.id = "c" + std::to_string(s->next_constraint++);
        c.created_at = detail::unix_now();
        json warnings = json::array();
        for (const auto& other : s->constraints) {
            if (detail::overlaps(c, other) && detail::opposed(c.kind, other.kind)) {
                warnings.push_back("conflicts with " + other.id + " (" + std::string(to_string(other.kind)) +
                                   "); the projections compose to a near-constant shape");
            }
        }
        s->constraints.push_back(c);
        ++s->revision;
        persist_session(*s);
        return {{"constraint_id", c.id}, {"constraint", to_json(c)}, {"revision", s->revision}, {"warnings", warnings}};
    }

    json list_constraints(const std::string& id) {
        auto s = session(id);
        std::lock_guard lk(s->mu);
        return {{"model_id", s->id}, {"revision", s->revision}, {"constraints", constraints_json(*s)}};
    }

    json delete_constraint(const std::string& id, const std::string& cid) {
        auto s = session(id);
        std::lock_guard lk(s->mu);
        if (s->state == JobState::running) throw HttpError{409, "state", "retrain in progress"};
        const auto it = std::find_if(s->constraints.begin(), s->constraints.end(),
                                     [&](const ConstraintSpec& c) { return c.id == cid; });
        if (it == s->constraints.end()) throw HttpError{404, "not_found", "unknown constraint '" + cid + "'"};
        s->constraints.erase(it);
        ++s->revision;
        persist_session(*s);
        return {{"model_id", s->id}, {"revision", s->revision}, {"deleted", cid}};
    }

    json retrain(const std::string& id) {
        auto s = session(id);
        std::lock_guard lk(s->mu);
        if (s->state == JobState::running) throw HttpError{409, "state", "retrain already in progress"};
        if (s->dataset_id.empty()) throw HttpError{409, "state", "imported model has no dataset to retrain on"};
        start_training(s);
        return {{"model_id", s->id}, {"state", to_string(s->state)}, {"revision", s->revision}};
    }

    json shape(const std::string& id, const std::string& feature) {
        auto s = session(id);
        std::shared_ptr<const GamModel> model;
        std::vector<ConstraintSpec> constraints;
        std::uint64_t revision = 0;
        {
            std::lock_guard lk(s->mu);
            model = s->model;
            constraints = s->constraints;
            revision = s->revision;
        }
        if (!model) throw HttpError{409, "state", "model has not finished training"};
        auto d = model->feature_index(feature);
        if (d < 0) throw HttpError{404, "not_found", "unknown feature '" + feature + "'"};
        const auto dd = static_cast<std::size_t>(d);
        const ShapeView v = shape_values(*model, dd, true);
        json out{{"model_id", id},
                 {"revision", revision},
                 {"feature", v.feature},
                 {"anchors", v.anchors},
                 {"values", v.values},
                 {"left_slope", v.left_slope},
                 {"right_slope", v.right_slope},
                 {"display_intercept", model->display_intercept}};
        json ids = json::array();
        json active = json::array();
        for (const auto& c : constraints) {
            if (c.feature == dd) {
                ids.push_back(c.id);
                active.push_back(to_json(c));
            }
        }
        out["constraint_ids"] = ids;
        out["constraints"] = active;
        if (!s->dataset_id.empty()) {
            auto ds = session_dataset(*s);
            const DensityProfile p = density_profile(v.anchors, ds->data.column(dd));
            out["density"] = {{"edges", p.edges}, {"counts", p.counts}, {"mass", p.mass}};
        } else {
            out["density"] = nullptr;
        }
        return out;
    }

    std::string export_model(const std::string& id) {
        auto s = session(id);
        std::shared_ptr<const GamModel> model;
        {
            std::lock_guard lk(s->mu);
            model = s->model;
        }
        if (!model) throw HttpError{409, "state", "model has not finished training"};
        return save_model(*model);
    }

    json import_model(const std::string& body) {
        GamModel m;
        try {
            m = load_model(body);
        } catch (const FormatError& e) {
            throw HttpError{400, e.kind(), e.what()};
        }
        auto s = std::make_shared<Session>();
        s->config = m.config;
        s->constraints = m.constraints;
        for (const auto& c : m.constraints) {
            if (c.id.size() > 1 && c.id[0] == 'c') {
                s->next_constraint = std::max(s->next_constraint, numeric_suffix(c.id, 1) + 1);
            }
        }
        s->model = std::make_shared<const GamModel>(std::move(m));
        s->revision = 1;
        {
            std::lock_guard lk(mu_);
            s->id = "m" + std::to_string(next_model_++);
            sessions_[s->id] = s;
        }
        std::lock_guard lk(s->mu);
        persist_session(*s);
        return {{"model_id", s->id}, {"revision", s->revision}};
    }

    json predict_rows(const std::string& id, const json& body) {
        auto s = session(id);
        std::shared_ptr<const GamModel> model;
        {
            std::lock_guard lk(s->mu);
            model = s->model;
        }
        if (!model) throw HttpError{409, "state", "model has not finished training"};
        const auto rows = detail::field<std::vector<std::vector<double>>>(body, "rows");
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model->features()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != model->features()) {
                throw HttpError{400, "validation", "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                                                       " values, model has " + std::to_string(model->features()) +
                                                       " features"};
            }
            for (std::size_t j = 0; j < rows[i].size(); ++j) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
            }
        }
        return {{"model_id", id}, {"predictions", predict(*model, x)}};
    }

    /// Blocks until the model's job leaves the running state (tests, CLI).
    JobState wait(const std::string& id, std::chrono::milliseconds timeout = std::chrono::minutes(5)) {
        auto s = session(id);
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (std::chrono::steady_clock::now() < deadline) {
            {
                std::lock_guard lk(s->mu);
                if (s->state != JobState::running) return s->state;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        return JobState::running;
    }

private:
    std::shared_ptr<const StoredDataset> dataset(const std::string& id) {
        std::lock_guard lk(mu_);
        const auto it = datasets_.find(id);
        if (it == datasets_.end()) throw HttpError{404, "not_found", "unknown dataset '" + id + "'"};
        return it->second;
    }

    std::shared_ptr<Session> session(const std::string& id) {
        std::lock_guard lk(mu_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw HttpError{404, "not_found", "unknown model '" + id + "'"};
        return it->second;
    }

    std::shared_ptr<const StoredDataset> session_dataset(const Session& s) {
        if (s.dataset_id.empty()) throw HttpError{409, "state", "imported model has no dataset"};
        return dataset(s.dataset_id);
    }

    static json constraints_json(const Session& s) {
        json out = json::array();
        for (const auto& c : s.constraints) out.push_back(to_json(c));
        return out;
    }

    // Caller holds s->mu.
    void start_training(const std::shared_ptr<Session>& s) {
        if (s->job.joinable()) s->job.join(); // previous job already finished
        auto ds = dataset(s->dataset_id);
        Dataset data = ds->data;
        data.weights = s->weights;
        s->state = JobState::running;
        s->message.clear();
        persist_session(*s);
        s->job = std::thread([this, s, data = std::move(data), cfg = s->config, constraints = s->constraints,
                              previous = s->model]() mutable {
            std::shared_ptr<const GamModel> model;
            std::string error;
            try {
                model = std::make_shared<const GamModel>(train(data, cfg, constraints, previous.get()));
            } catch (const std::exception& e) {
                error = e.what();
            }
            std::lock_guard lk(s->mu);
            if (model) {
                s->model = std::move(model);
                s->state = JobState::idle;
                ++s->revision;
            } else {
                s->state = JobState::failed;
                s->message = error;
            }
            try {
                persist_session(*s);
            } catch (const std::exception&) {
                // keep serving from memory
            }
        });
    }

    void persist_dataset(const StoredDataset& ds) {
        json meta{{"dataset_id", ds.id}, {"target_column", ds.columns.target}};
        meta["weight_column"] = ds.columns.weight ? json(*ds.columns.weight) : json(nullptr);
        meta["id_column"] = ds.columns.id ? json(*ds.columns.id) : json(nullptr);
        const fs::path dir = opt_.data_dir / "datasets";
        detail::write_atomic(dir / (ds.id + ".csv"), ds.csv);
        detail::write_atomic(dir / (ds.id + ".json"), meta.dump(1));
    }

    // Caller holds s.mu.
    void persist_session(const Session& s) {
        json j{{"model_id", s.id},
               {"dataset_id", s.dataset_id},
               {"config", to_json(s.config)},
               {"weights", s.weights},
               {"constraints", constraints_json(s)},
               {"state", to_string(s.state)},
               {"message", s.message},
               {"revision", s.revision},
               {"next_constraint", s.next_constraint}};
        const fs::path dir = opt_.data_dir / "models" / s.id;
        if (s.model) detail::write_atomic(dir / "model.json", save_model(*s.model));
        detail::write_atomic(dir / "session.json", j.dump(1));
    }

    static std::uint64_t numeric_suffix(const std::string& id, std::size_t prefix) {
        try {
            return std::stoull(id.substr(prefix));
        } catch (const std::exception&) {
            return 0;
        }
    }

    void restore() {
        for (const auto& e : fs::directory_iterator(opt_.data_dir / "datasets")) {
            if (e.path().extension() != ".json") continue;
            const json meta = json::parse(detail::read_all(e.path()));
            StoredDataset ds;
            ds.id = meta.at("dataset_id").get<std::string>();
            ds.columns.target = meta.at("target_column").get<std::string>();
            if (!meta.at("weight_column").is_null()) ds.columns.weight = meta.at("weight_column").get<std::string>();
            if (!meta.at("id_column").is_null()) ds.columns.id = meta.at("id_column").get<std::string>();
            ds.csv = detail::read_all(e.path().parent_path() / (ds.id + ".csv"));
            ds.data = parse_dataset(ds.csv, ds.columns);
            next_dataset_ = std::max(next_dataset_, numeric_suffix(ds.id, 2) + 1);
            const std::string key = ds.id;
            datasets_[key] = std::make_shared<const StoredDataset>(std::move(ds));
        }
        std::vector<std::shared_ptr<Session>> interrupted;
        for (const auto& e : fs::directory_iterator(opt_.data_dir / "models")) {
            const fs::path file = e.path() / "session.json";
            if (!fs::exists(file)) continue;
            const json j = json::parse(detail::read_all(file));
            auto s = std::make_shared<Session>();
            s->id = j.at("model_id").get<std::string>();
            s->dataset_id = j.at("dataset_id").get<std::string>();
            s->config = train_config_from_json(j.at("config"));
            s->weights = j.at("weights").get<std::vector<double>>();
            for (const auto& c : j.at("constraints")) s->constraints.push_back(constraint_from_json(c));
            s->state = parse_job_state(j.at("state").get<std::string>());
            s->message = j.at("message").get<std::string>();
            s->revision = j.at("revision").get<std::uint64_t>();
            s->next_constraint = j.at("next_constraint").get<std::uint64_t>();
            if (fs::exists(e.path() / "model.json")) {
                s->model = std::make_shared<const GamModel>(load_model(detail::read_all(e.path() / "model.json")));
            }
            next_model_ = std::max(next_model_, numeric_suffix(s->id, 1) + 1);
            if (s->state == JobState::running) interrupted.push_back(s);
            sessions_[s->id] = s;
        }
        // A job cut short by a restart is simply run again; training is deterministic.
        for (auto& s : interrupted) {
            std::lock_guard lk(s->mu);
            start_training(s);
        }
    }

    template <class F>
    void handle(httplib::Response& res, F&& f) {
        auto fail = [&](int status, const std::string& kind, const std::string& message) {
            res.status = status;
            res.set_content(json{{"error", kind}, {"message", message}}.dump(), "application/json");
        };
        try {
            f();
        } catch (const HttpError& e) {
            fail(e.status, e.kind, e.message);
        } catch (const SolverError& e) {
            fail(422, e.kind(), e.what());
        } catch (const Error& e) {
            fail(400, e.kind(), e.what());
        } catch (const std::exception& e) {
            fail(500, "internal", e.what());
        }
    }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static std::optional<std::size_t> index_param(const httplib::Request& req, const char* key) {
        if (!req.has_param(key)) return std::nullopt;
        const std::string v = req.get_param_value(key);
        std::size_t out = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size()) {
            throw HttpError{400, "validation", std::string("query parameter '") + key + "' must be a row index"};
        }
        return out;
    }

    void routes() {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                     {"Access-Control-Allow-Headers", "Content-Type"},
                                     {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
        server_.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server_.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 201, create_dataset(detail::parse_body(req))); });
        });
        server_.Post("/models", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 202, create_model(detail::parse_body(req))); });
        });
        server_.Post("/models/import", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 201, import_model(req.body)); });
        });
        server_.Get(R"(/models/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 200, get_model(req.matches[1])); });
        });
        server_.Get(R"(/models/([^/]+)/series)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::optional<std::string> ref;
                if (req.has_param("ref_factor")) ref = req.get_param_value("ref_factor");
                reply(res, 200, series(req.matches[1], index_param(req, "from"), index_param(req, "to"), ref));
            });
        });
        server_.Post(R"(/models/([^/]+)/weights)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 200, edit_weights(req.matches[1], detail::parse_body(req))); });
        });
        server_.Post(R"(/models/([^/]+)/constraints)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 201, add_constraint(req.matches[1], detail::parse_body(req))); });
        });
        server_.Get(R"(/models/([^/]+)/constraints)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 200, list_constraints(req.matches[1])); });
        });
        server_.Delete(R"(/models/([^/]+)/constraints/([^/]+))",
                       [this](const httplib::Request& req, httplib::Response& res) {
                           handle(res, [&] { reply(res, 200, delete_constraint(req.matches[1], req.matches[2])); });
                       });
        server_.Post(R"(/models/([^/]+)/retrain)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 202, retrain(req.matches[1])); });
        });
        server_.Get(R"(/models/([^/]+)/shapes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 200, shape(req.matches[1], req.matches[2])); });
        });
        server_.Get(R"(/models/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                res.status = 200;
                res.set_content(export_model(req.matches[1]), "application/json");
            });
        });
        server_.Post(R"(/models/([^/]+)/predict)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 200, predict_rows(req.matches[1], detail::parse_body(req))); });
        });
    }

    Options opt_;
    httplib::Server server_;
    int port_ = -1;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<const StoredDataset>> datasets_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_dataset_ = 1;
    std::uint64_t next_model_ = 1;
};

} // namespace igam::service
