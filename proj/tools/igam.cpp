// igam: command-line front end (train, predict, eval, export-shapes,
// gen-synthetic, serve).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "igam/igam.hpp"
#include "igam/service.hpp"

namespace fs = std::filesystem;
using namespace igam;

namespace {

struct ConfigFlags {
    std::optional<std::string> file;
    std::optional<double> lambda;
    std::optional<std::size_t> k_basis;
    std::optional<double> step;
    std::optional<std::size_t> rounds;
    std::optional<double> alpha;
    std::optional<std::size_t> grid_size;
    std::optional<bool> pairwise;
    std::optional<bool> standardize_target;
    std::optional<std::uint64_t> seed;
    std::optional<bool> warm_start;
    std::optional<std::size_t> folds;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool with_folds) {
    cmd->add_option("--config", f.file, "key = value file; flags override it");
    cmd->add_option("--lambda", f.lambda, "ridge trade-off (>= 0)");
    cmd->add_option("--k-basis", f.k_basis, "basis budget per PLA fit");
    cmd->add_option("--step", f.step, "boosting step size (> 0)");
    cmd->add_option("--rounds", f.rounds, "boosting rounds");
    cmd->add_option("--alpha", f.alpha, "blend coefficient for constrained features, [0, 1)");
    cmd->add_option("--grid-size", f.grid_size, "threshold grid size");
    cmd->add_option("--pairwise", f.pairwise, "select hinge pairs (true|false)");
    cmd->add_option("--standardize-target", f.standardize_target, "z-score the target (true|false)");
    cmd->add_option("--seed", f.seed, "seed for fold assignment");
    cmd->add_option("--warm-start", f.warm_start, "continue from --init model (true|false)");
    if (with_folds) cmd->add_option("--folds", f.folds, "number of CV folds");
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    std::istringstream ss(v);
    ss >> out;
    if (!ss || !ss.eof()) throw ValidationError("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

// Returns (config, folds).
std::pair<TrainConfig, std::size_t> resolve_config(const ConfigFlags& f, TrainConfig cfg) {
    std::size_t folds = 5;
    if (f.file) {
        std::ifstream in(*f.file);
        if (!in) throw ConfigurationError("config not found: " + *f.file);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigurationError(*f.file + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string v = trim(line.substr(eq + 1));
            if (key == "lambda") cfg.lambda = parse_number<double>(key, v);
            else if (key == "k_basis") cfg.k_basis = parse_number<std::size_t>(key, v);
            else if (key == "step") cfg.step = parse_number<double>(key, v);
            else if (key == "rounds") cfg.rounds = parse_number<std::size_t>(key, v);
            else if (key == "alpha") cfg.alpha = parse_number<double>(key, v);
            else if (key == "grid_size") cfg.grid_size = parse_number<std::size_t>(key, v);
            else if (key == "pairwise") cfg.pairwise = parse_bool(key, v);
            else if (key == "standardize_target") cfg.standardize_target = parse_bool(key, v);
            else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
            else if (key == "warm_start") cfg.warm_start = parse_bool(key, v);
            else if (key == "folds") folds = parse_number<std::size_t>(key, v);
            else throw ConfigurationError(*f.file + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (f.lambda) cfg.lambda = *f.lambda;
    if (f.k_basis) cfg.k_basis = *f.k_basis;
    if (f.step) cfg.step = *f.step;
    if (f.rounds) cfg.rounds = *f.rounds;
    if (f.alpha) cfg.alpha = *f.alpha;
    if (f.grid_size) cfg.grid_size = *f.grid_size;
    if (f.pairwise) cfg.pairwise = *f.pairwise;
    if (f.standardize_target) cfg.standardize_target = *f.standardize_target;
    if (f.seed) cfg.seed = *f.seed;
    if (f.warm_start) cfg.warm_start = *f.warm_start;
    if (f.folds) folds = *f.folds;
    validate(cfg);
    return {cfg, folds};
}

struct DataFlags {
    std::string path;
    std::string target;
    std::optional<std::string> weight;
    std::optional<std::string> id;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
    cmd->add_option("--data", d.path, "training CSV")->required();
    cmd->add_option("--target", d.target, "target column")->required();
    cmd->add_option("--weight", d.weight, "weight column");
    cmd->add_option("--id-column", d.id, "row id column (excluded from features)");
}

Dataset load(const DataFlags& d) { return load_csv(d.path, CsvColumns{d.target, d.weight, d.id}); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigurationError("cannot write " + path);
    out << text;
    if (!out) throw ConfigurationError("cannot write " + path);
}

std::vector<ConstraintSpec> read_constraints(const std::string& path, const Dataset& d) {
    const nlohmann::json j = nlohmann::json::parse(csv::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw IngestionError("constraints file must be a JSON array: " + path);
    std::vector<ConstraintSpec> out;
    std::int64_t order = 0;
    for (const auto& c : j) {
        ConstraintSpec s;
        const auto& f = c.at("feature");
        if (f.is_string()) {
            const auto k = d.feature_index(f.get<std::string>());
            if (k < 0) throw ConfigurationError("constraint on unknown feature '" + f.get<std::string>() + "'");
            s.feature = static_cast<std::size_t>(k);
        } else {
            s.feature = f.get<std::size_t>();
        }
        s.kind = parse_constraint_kind(c.at("kind").get<std::string>());
        s.lo = c.at("lo").get<double>();
        s.hi = c.at("hi").get<double>();
        s.id = c.value("id", "c" + std::to_string(order + 1));
        s.created_at = c.value("created_at", order);
        ++order;
        out.push_back(s);
    }
    return out;
}

int fail(int code, const std::string& kind, const std::string& message) {
    std::string one_line = message;
    for (char& c : one_line) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    std::cerr << "error: " << kind << ": " << one_line << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive piecewise-linear GAM"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "fit a model");
    DataFlags train_data;
    ConfigFlags train_cfg;
    std::string train_out;
    std::optional<std::string> train_constraints;
    std::optional<std::string> train_init;
    add_data_flags(train_cmd, train_data);
    add_config_flags(train_cmd, train_cfg, false);
    train_cmd->add_option("--constraints", train_constraints, "JSON array of {feature, kind, lo, hi}");
    train_cmd->add_option("--init", train_init, "model to continue from when --warm-start true");
    train_cmd->add_option("--out", train_out, "model file")->required();

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "predict with a saved model");
    std::string predict_model;
    std::string predict_data;
    std::string predict_out;
    std::optional<std::string> predict_id;
    predict_cmd->add_option("--model", predict_model, "model file")->required();
    predict_cmd->add_option("--data", predict_data, "input CSV")->required();
    predict_cmd->add_option("--id-column", predict_id, "column copied to row_id");
    predict_cmd->add_option("--out", predict_out, "prediction CSV (row_id, prediction)")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "k-fold cross-validation");
    DataFlags eval_data;
    ConfigFlags eval_cfg;
    std::optional<std::string> eval_report;
    std::optional<std::string> eval_name;
    add_data_flags(eval_cmd, eval_data);
    add_config_flags(eval_cmd, eval_cfg, true);
    eval_cmd->add_option("--report", eval_report, "JSON report file");
    eval_cmd->add_option("--name", eval_name, "dataset name in the report (default: file stem)");

    // export-shapes
    auto* export_cmd = app.add_subcommand("export-shapes", "dump shape tables in raw units");
    std::string export_model;
    std::optional<std::string> export_feature;
    std::optional<std::string> export_dir;
    std::optional<std::string> export_data;
    bool export_centered = false;
    export_cmd->add_option("--model", export_model, "model file")->required();
    export_cmd->add_option("--feature", export_feature, "only this feature");
    export_cmd->add_option("--out-dir", export_dir, "write <feature>.csv files here instead of stdout");
    export_cmd->add_option("--data", export_data, "training CSV for density histograms");
    export_cmd->add_flag("--centered", export_centered, "center values; the offset goes to the intercept");

    // gen-synthetic
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a synthetic electric-load dataset");
    std::size_t gen_days = 365;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    std::optional<std::string> gen_mask;
    gen_cmd->add_option("--days", gen_days, "days (>= 7)");
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--out", gen_out, "CSV path")->required();
    gen_cmd->add_option("--mask-out", gen_mask, "CSV of timestamp, heat_wave flags");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    std::optional<std::string> serve_bind;
    std::optional<std::string> serve_dir;
    std::optional<std::uint64_t> serve_seed;
    serve_cmd->add_option("--bind", serve_bind, "host:port (default IGAM_BIND or 127.0.0.1:8080)");
    serve_cmd->add_option("--data-dir", serve_dir, "state directory (default IGAM_DATA_DIR or ./igam-data)");
    serve_cmd->add_option("--seed", serve_seed, "default seed (default IGAM_SEED or 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(2, "usage", e.what());
    }

    try {
        if (*train_cmd) {
            const auto [cfg, folds] = resolve_config(train_cfg, TrainConfig::benchmark());
            (void)folds;
            const Dataset d = load(train_data);
            std::vector<ConstraintSpec> constraints;
            if (train_constraints) constraints = read_constraints(*train_constraints, d);
            std::optional<GamModel> init;
            if (train_init) init = load_model_file(*train_init);
            const GamModel m = train(d, cfg, constraints, init ? &*init : nullptr);
            save_model_file(m, train_out);
            for (std::size_t t = 0; t < m.meta.loss_trace.size(); ++t) {
                std::printf("round %zu loss %.10g\n", t, m.meta.loss_trace[t]);
            }
            std::printf("wrote %s\n", train_out.c_str());
        } else if (*predict_cmd) {
            const GamModel m = load_model_file(predict_model);
            const std::string text = csv::read_file(predict_data);
            const FeatureTable t = parse_feature_table(text, m.feature_names, predict_id);
            for (const auto& c : t.unused_columns) std::cerr << "warning: ignoring column '" << c << "'\n";
            const auto pred = predict(m, t.features);
            std::string out = "row_id,prediction\n";
            for (std::size_t i = 0; i < pred.size(); ++i) out += csv::quote(t.row_ids[i]) + "," + format_real(pred[i]) + "\n";
            write_text(predict_out, out);
        } else if (*eval_cmd) {
            const auto [cfg, folds] = resolve_config(eval_cfg, TrainConfig::benchmark());
            if (folds < 2) throw ValidationError("folds must be >= 2 (got " + std::to_string(folds) + ")");
            const Dataset d = load(eval_data);
            const FoldPlan plan = kfold(d, folds, cfg.seed);
            const CvResult r = cross_validate(d, cfg, plan);
            const std::string name = eval_name ? *eval_name : fs::path(eval_data.path).stem().string();
            std::fputs(cv_table(name, r).c_str(), stdout);
            if (eval_report) write_text(*eval_report, cv_report(name, cfg, r).dump(1) + "\n");
        } else if (*export_cmd) {
            const GamModel m = load_model_file(export_model);
            std::optional<FeatureTable> data;
            if (export_data) data = parse_feature_table(csv::read_file(*export_data), m.feature_names);
            std::vector<std::size_t> which;
            if (export_feature) {
                const auto k = m.feature_index(*export_feature);
                if (k < 0) throw ConfigurationError("unknown feature '" + *export_feature + "'");
                which.push_back(static_cast<std::size_t>(k));
            } else {
                for (std::size_t d = 0; d < m.features(); ++d) which.push_back(d);
            }
            if (export_dir) fs::create_directories(*export_dir);
            for (const auto d : which) {
                const ShapeView v = shape_values(m, d, true, export_centered);
                std::string table = "anchor,value\n";
                for (std::size_t j = 0; j < v.anchors.size(); ++j) {
                    table += format_real(v.anchors[j]) + "," + format_real(v.values[j]) + "\n";
                }
                std::string density;
                if (data) {
                    const auto col = data->features.col(static_cast<Eigen::Index>(d));
                    const DensityProfile p = density_profile(v.anchors, std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
                    density = "bin_lo,bin_hi,count,mass\n";
                    for (std::size_t k = 0; k < p.counts.size(); ++k) {
                        const double lo = p.edges.empty() ? 0.0 : p.edges[std::min(k, p.edges.size() - 1)];
                        const double hi = p.edges.empty() ? 0.0 : p.edges[std::min(k + 1, p.edges.size() - 1)];
                        density += format_real(lo) + "," + format_real(hi) + "," + std::to_string(p.counts[k]) + "," +
                                   format_real(p.mass[k]) + "\n";
                    }
                }
                if (export_dir) {
                    write_text((fs::path(*export_dir) / (v.feature + ".csv")).string(), table);
                    if (data) write_text((fs::path(*export_dir) / (v.feature + "_density.csv")).string(), density);
                } else {
                    std::printf("# %s (left slope %s, right slope %s)\n%s", v.feature.c_str(),
                                format_real(v.left_slope).c_str(), format_real(v.right_slope).c_str(), table.c_str());
                    if (data) std::printf("# %s density\n%s", v.feature.c_str(), density.c_str());
                }
            }
            if (export_centered) std::printf("# display_intercept %s\n", format_real(m.display_intercept).c_str());
        } else if (*gen_cmd) {
            const SyntheticLoad s = gen_synthetic_load(gen_days, gen_seed);
            write_text(gen_out, to_csv(s.data, std::string("timestamp")));
            if (gen_mask) {
                std::string mask = "timestamp,heat_wave\n";
                for (std::size_t i = 0; i < s.heat_wave.size(); ++i) {
                    mask += s.data.row_ids[i] + "," + (s.heat_wave[i] ? "1" : "0") + "\n";
                }
                write_text(*gen_mask, mask);
            }
        } else if (*serve_cmd) {
            auto opt = service::Options::from_env();
            if (serve_bind) {
                const auto colon = serve_bind->rfind(':');
                if (colon == std::string::npos) throw ConfigurationError("--bind must be host:port");
                opt.host = serve_bind->substr(0, colon);
                opt.port = std::stoi(serve_bind->substr(colon + 1));
            }
            if (serve_dir) opt.data_dir = *serve_dir;
            if (serve_seed) opt.default_seed = *serve_seed;
            service::Service svc(opt);
            const int port = svc.bind();
            std::printf("listening on %s:%d\n", opt.host.c_str(), port);
            std::fflush(stdout);
            svc.serve();
        }
    } catch (const ConfigurationError& e) {
        return fail(2, e.kind(), e.what());
    } catch (const ValidationError& e) {
        return fail(2, e.kind(), e.what());
    } catch (const IngestionError& e) {
        return fail(2, e.kind(), e.what());
    } catch (const FormatError& e) {
        return fail(2, e.kind(), e.what());
    } catch (const Error& e) {
        return fail(1, e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail(1, "internal", e.what());
    }
    return 0;
}
