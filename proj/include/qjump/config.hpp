#pragma once

// Experiment configuration: a single JSON document with complex entries as
// [re, im] pairs. Parse errors name the offending field. Serialization is
// canonical (sorted keys, value-based keywords), so equal configs serialize
// to equal bytes and the config hash is reproducible from the document.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qjump/matrix.hpp"
#include "qjump/model.hpp"

namespace qjump {

class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

  private:
    std::string field_;
};

struct RunConfig {
    double T = 1.0;
    std::vector<int> n_grid = {100};
    int n_paths = 1000;
    int grid_points = 101;
    std::uint64_t seed = 1;
    BlockMode mode = BlockMode::exact;
    int path_files = 32;  // cap on per-path CSV/realization files
};

struct OutputConfig {
    std::string directory = "out";
    bool csv = true;
    bool json = true;
};

struct ExperimentConfig {
    ModelSpec model;
    Mat2 rho0 = diag2(0.0, 1.0);
    RunConfig run;
    OutputConfig output;
};

namespace detail {

using nlohmann::json;

inline cplx parse_complex(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(field, "expected a [re, im] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Mat2 parse_mat2(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError(field, "expected a 2x2 matrix as two rows");
    Mat2 m;
    for (int r = 0; r < 2; ++r) {
        if (!j[r].is_array() || j[r].size() != 2)
            throw ConfigError(field, "row " + std::to_string(r) + " must have 2 entries");
        for (int c = 0; c < 2; ++c)
            m(r, c) = parse_complex(j[r][c], field + "[" + std::to_string(r) + "][" +
                                                  std::to_string(c) + "]");
    }
    return m;
}

inline json complex_to_json(const cplx& z) { return json::array({z.real(), z.imag()}); }

inline json mat2_to_json(const Mat2& m) {
    json rows = json::array();
    for (int r = 0; r < 2; ++r) {
        json row = json::array();
        for (int c = 0; c < 2; ++c) row.push_back(complex_to_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

inline const json& require(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + "." + key, "missing required field");
    return *it;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    using nlohmann::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("document", std::string("malformed JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("document", "top level must be an object");

    ExperimentConfig cfg;
    const json& model = detail::require(root, "model", "document");
    if (!model.is_object()) throw ConfigError("model", "must be an object");

    cfg.model.H = detail::parse_mat2(detail::require(model, "H", "model"), "model.H");
    if (hermiticity_defect(cfg.model.H) > tol_state)
        throw ConfigError("model.H", "not hermitian");
    cfg.model.C = detail::parse_mat2(detail::require(model, "C", "model"), "model.C");

    if (model.contains("observable")) {
        const json& obs = model["observable"];
        if (obs.is_string()) {
            if (obs.get<std::string>() != "diagonal")
                throw ConfigError("model.observable", "unknown keyword (use \"diagonal\")");
            cfg.model.observable = ObservableSpec::diagonal();
        } else if (obs.is_object()) {
            cfg.model.observable.P0 =
                detail::parse_mat2(detail::require(obs, "P0", "model.observable"),
                                   "model.observable.P0");
            cfg.model.observable.P1 = Mat2::identity() - cfg.model.observable.P0;
        } else {
            throw ConfigError("model.observable", "expected \"diagonal\" or {\"P0\": ...}");
        }
        try {
            cfg.model.observable.validate();
        } catch (const std::exception& e) {
            throw ConfigError("model.observable", e.what());
        }
    } else {
        cfg.model.observable = ObservableSpec::diagonal();
    }

    if (model.contains("beta")) {
        const json& beta = model["beta"];
        if (beta.is_string()) {
            if (beta.get<std::string>() != "ground")
                throw ConfigError("model.beta", "unknown keyword (use \"ground\")");
            cfg.model.beta = diag2(1.0, 0.0);
        } else {
            cfg.model.beta = detail::parse_mat2(beta, "model.beta");
        }
        if (!validate_state(cfg.model.beta, tol_state).pass)
            throw ConfigError("model.beta", "not a state");
    } else {
        cfg.model.beta = diag2(1.0, 0.0);
    }

    if (model.contains("rho0")) {
        const json& r0 = model["rho0"];
        if (r0.is_string()) {
            const auto kw = r0.get<std::string>();
            if (kw == "ground")
                cfg.rho0 = diag2(1.0, 0.0);
            else if (kw == "excited")
                cfg.rho0 = diag2(0.0, 1.0);
            else
                throw ConfigError("model.rho0", "unknown keyword (use \"ground\" or \"excited\")");
        } else {
            cfg.rho0 = detail::parse_mat2(r0, "model.rho0");
        }
        if (!validate_state(cfg.rho0, tol_state).pass)
            throw ConfigError("model.rho0", "not a state");
    }

    try {
        cfg.model.validate();
    } catch (const std::exception& e) {
        throw ConfigError("model", e.what());
    }

    if (root.contains("run")) {
        const json& run = root["run"];
        if (!run.is_object()) throw ConfigError("run", "must be an object");
        if (run.contains("T")) {
            if (!run["T"].is_number()) throw ConfigError("run.T", "expected a number");
            cfg.run.T = run["T"].get<double>();
        }
        if (!(cfg.run.T > 0.0)) throw ConfigError("run.T", "must be positive");
        if (run.contains("n_grid")) {
            const json& ng = run["n_grid"];
            if (!ng.is_array() || ng.empty())
                throw ConfigError("run.n_grid", "expected a nonempty integer array");
            cfg.run.n_grid.clear();
            for (std::size_t i = 0; i < ng.size(); ++i) {
                if (!ng[i].is_number_integer())
                    throw ConfigError("run.n_grid", "entry " + std::to_string(i) +
                                                        " is not an integer");
                const auto v = ng[i].get<std::int64_t>();
                if (v < 1) throw ConfigError("run.n_grid", "entries must be >= 1");
                if (!cfg.run.n_grid.empty() && v <= cfg.run.n_grid.back())
                    throw ConfigError("run.n_grid", "entries must strictly increase");
                cfg.run.n_grid.push_back(static_cast<int>(v));
            }
        }
        if (run.contains("n_paths")) {
            if (!run["n_paths"].is_number_integer())
                throw ConfigError("run.n_paths", "expected an integer");
            const auto v = run["n_paths"].get<std::int64_t>();
            if (v < 1) throw ConfigError("run.n_paths", "must be >= 1");
            cfg.run.n_paths = static_cast<int>(v);
        }
        if (run.contains("grid_points")) {
            if (!run["grid_points"].is_number_integer())
                throw ConfigError("run.grid_points", "expected an integer");
            const auto v = run["grid_points"].get<std::int64_t>();
            if (v < 2) throw ConfigError("run.grid_points", "must be >= 2");
            cfg.run.grid_points = static_cast<int>(v);
        }
        if (run.contains("seed")) {
            const json& s = run["seed"];
            if (s.is_number_unsigned())
                cfg.run.seed = s.get<std::uint64_t>();
            else if (s.is_number_integer() && s.get<std::int64_t>() >= 0)
                cfg.run.seed = static_cast<std::uint64_t>(s.get<std::int64_t>());
            else if (s.is_string()) {
                try {
                    cfg.run.seed = std::stoull(s.get<std::string>());
                } catch (const std::exception&) {
                    throw ConfigError("run.seed", "expected a 64-bit unsigned integer");
                }
            } else
                throw ConfigError("run.seed", "expected a 64-bit unsigned integer");
        }
        if (run.contains("mode")) {
            if (!run["mode"].is_string())
                throw ConfigError("run.mode", "expected \"exact\" or \"asymptotic\"");
            const auto m = run["mode"].get<std::string>();
            if (m == "exact")
                cfg.run.mode = BlockMode::exact;
            else if (m == "asymptotic")
                cfg.run.mode = BlockMode::asymptotic;
            else
                throw ConfigError("run.mode", "expected \"exact\" or \"asymptotic\"");
        }
        if (run.contains("path_files")) {
            if (!run["path_files"].is_number_integer())
                throw ConfigError("run.path_files", "expected an integer");
            const auto v = run["path_files"].get<std::int64_t>();
            if (v < 0) throw ConfigError("run.path_files", "must be >= 0");
            cfg.run.path_files = static_cast<int>(v);
        }
    }

    if (root.contains("output")) {
        const json& out = root["output"];
        if (!out.is_object()) throw ConfigError("output", "must be an object");
        if (out.contains("directory")) {
            if (!out["directory"].is_string())
                throw ConfigError("output.directory", "expected a string");
            cfg.output.directory = out["directory"].get<std::string>();
        }
        if (out.contains("formats")) {
            const json& f = out["formats"];
            if (!f.is_array()) throw ConfigError("output.formats", "expected an array");
            cfg.output.csv = false;
            cfg.output.json = false;
            for (const auto& e : f) {
                if (!e.is_string())
                    throw ConfigError("output.formats", "entries must be strings");
                const auto s = e.get<std::string>();
                if (s == "csv")
                    cfg.output.csv = true;
                else if (s == "json")
                    cfg.output.json = true;
                else
                    throw ConfigError("output.formats", "unknown format \"" + s + "\"");
            }
            if (!cfg.output.csv && !cfg.output.json)
                throw ConfigError("output.formats", "must contain csv or json");
        }
    }
    return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    using nlohmann::json;
    json model;
    model["H"] = detail::mat2_to_json(cfg.model.H);
    model["C"] = detail::mat2_to_json(cfg.model.C);
    const auto diag = ObservableSpec::diagonal();
    if (frobenius_norm(cfg.model.observable.P0 - diag.P0) == 0.0)
        model["observable"] = "diagonal";
    else {
        json obs;
        obs["P0"] = detail::mat2_to_json(cfg.model.observable.P0);
        model["observable"] = obs;
    }
    if (frobenius_norm(cfg.model.beta - diag2(1.0, 0.0)) == 0.0)
        model["beta"] = "ground";
    else
        model["beta"] = detail::mat2_to_json(cfg.model.beta);
    if (frobenius_norm(cfg.rho0 - diag2(1.0, 0.0)) == 0.0)
        model["rho0"] = "ground";
    else if (frobenius_norm(cfg.rho0 - diag2(0.0, 1.0)) == 0.0)
        model["rho0"] = "excited";
    else
        model["rho0"] = detail::mat2_to_json(cfg.rho0);

    json run;
    run["T"] = cfg.run.T;
    run["n_grid"] = cfg.run.n_grid;
    run["n_paths"] = cfg.run.n_paths;
    run["grid_points"] = cfg.run.grid_points;
    run["seed"] = cfg.run.seed;
    run["mode"] = cfg.run.mode == BlockMode::exact ? "exact" : "asymptotic";
    run["path_files"] = cfg.run.path_files;

    json output;
    output["directory"] = cfg.output.directory;
    json formats = json::array();
    if (cfg.output.csv) formats.push_back("csv");
    if (cfg.output.json) formats.push_back("json");
    output["formats"] = formats;

    json root;
    root["model"] = model;
    root["run"] = run;
    root["output"] = output;
    return root.dump(2) + "\n";  // nlohmann orders object keys, so this is canonical
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.T == b.T && a.n_grid == b.n_grid && a.n_paths == b.n_paths &&
           a.grid_points == b.grid_points && a.seed == b.seed && a.mode == b.mode &&
           a.path_files == b.path_files;
}

inline bool operator==(const OutputConfig& a, const OutputConfig& b) {
    return a.directory == b.directory && a.csv == b.csv && a.json == b.json;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    const auto same = [](const Mat2& x, const Mat2& y) { return frobenius_norm(x - y) == 0.0; };
    return same(a.model.H, b.model.H) && same(a.model.C, b.model.C) &&
           same(a.model.observable.P0, b.model.observable.P0) &&
           same(a.model.observable.P1, b.model.observable.P1) &&
           same(a.model.beta, b.model.beta) && same(a.rho0, b.rho0) && a.run == b.run &&
           a.output == b.output;
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string s = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace qjump
