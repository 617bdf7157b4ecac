#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "qjump/config.hpp"
#include "qjump/io.hpp"
#include "qjump/matrix.hpp"

using namespace qjump;

namespace {

const char* kMinimalDoc = R"({
  "model": {
    "H": [[[0.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]],
    "C": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]
  }
})";

const char* kFullDoc = R"({
  "model": {
    "H": [[[0.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]],
    "C": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]],
    "observable": "diagonal",
    "beta": "ground",
    "rho0": "excited"
  },
  "run": {
    "T": 2.0,
    "n_grid": [8, 16, 32, 64],
    "n_paths": 500,
    "grid_points": 51,
    "seed": "9223372036854775813",
    "mode": "asymptotic",
    "path_files": 4
  },
  "output": {
    "directory": "results",
    "formats": ["csv"]
  }
})";

std::string error_field(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "no error";
}

}  // namespace

TEST_CASE("minimal document parses with documented defaults", "[config]") {
    const auto cfg = parse_config(kMinimalDoc);
    CHECK(frobenius_norm(cfg.model.H - diag2(0.5, -0.5)) == 0.0);
    CHECK(frobenius_norm(cfg.model.C - mat2(0.0, 1.0, 0.0, 0.0)) == 0.0);
    CHECK(cfg.model.observable.is_diagonal());
    CHECK(frobenius_norm(cfg.model.beta - diag2(1.0, 0.0)) == 0.0);
    CHECK(frobenius_norm(cfg.rho0 - diag2(0.0, 1.0)) == 0.0);
    CHECK(cfg.run == RunConfig{});
    CHECK(cfg.output == OutputConfig{});
}

TEST_CASE("full document: keywords, string seed, run and output blocks", "[config]") {
    const auto cfg = parse_config(kFullDoc);
    CHECK(cfg.run.T == 2.0);
    CHECK(cfg.run.n_grid == std::vector<int>{8, 16, 32, 64});
    CHECK(cfg.run.n_paths == 500);
    CHECK(cfg.run.grid_points == 51);
    CHECK(cfg.run.seed == 9223372036854775813ull);  // above the int64 range
    CHECK(cfg.run.mode == BlockMode::asymptotic);
    CHECK(cfg.run.path_files == 4);
    CHECK(cfg.output.directory == "results");
    CHECK(cfg.output.csv);
    CHECK_FALSE(cfg.output.json);
}

TEST_CASE("parse errors name the offending field", "[config]") {
    CHECK(error_field("{ nope") == "document");
    CHECK(error_field("{}") == "document.model");
    CHECK(error_field(R"({"model": {"C": [[[0,0],[1,0]],[[0,0],[0,0]]]}})") == "model.H");

    std::string doc = kFullDoc;
    auto swap = [&](const std::string& from, const std::string& to) {
        std::string d = doc;
        d.replace(d.find(from), from.size(), to);
        return d;
    };
    // break hermiticity of H
    CHECK(error_field(swap("[[0.5, 0], [0, 0]]", "[[0.5, 0], [3, 0]]")) == "model.H");
    CHECK(error_field(swap("\"diagonal\"", "\"sideways\"")) == "model.observable");
    CHECK(error_field(swap("\"ground\"", "\"warm\"")) == "model.beta");
    CHECK(error_field(swap("\"excited\"", "\"tepid\"")) == "model.rho0");
    CHECK(error_field(swap("\"T\": 2.0", "\"T\": 0")) == "run.T");
    CHECK(error_field(swap("[8, 16, 32, 64]", "[8, 8]")) == "run.n_grid");
    CHECK(error_field(swap("[8, 16, 32, 64]", "[]")) == "run.n_grid");
    CHECK(error_field(swap("\"n_paths\": 500", "\"n_paths\": 0")) == "run.n_paths");
    CHECK(error_field(swap("\"grid_points\": 51", "\"grid_points\": 1")) == "run.grid_points");
    CHECK(error_field(swap("\"9223372036854775813\"", "\"a few\"")) == "run.seed");
    CHECK(error_field(swap("\"mode\": \"asymptotic\"", "\"mode\": \"sloppy\"")) == "run.mode");
    CHECK(error_field(swap("[\"csv\"]", "[\"parquet\"]")) == "output.formats");
    CHECK(error_field(swap("[\"csv\"]", "[]")) == "output.formats");
}

TEST_CASE("observable can be given as an explicit projector", "[config]") {
    std::string doc = kMinimalDoc;
    doc.insert(doc.rfind('}', doc.rfind('}') - 1),
               R"(, "observable": {"P0": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]})");
    const auto cfg = parse_config(doc);
    CHECK(cfg.model.observable.is_diagonal());

    std::string bad = kMinimalDoc;
    bad.insert(bad.rfind('}', bad.rfind('}') - 1),
               R"(, "observable": {"P0": [[[0.9, 0], [0, 0]], [[0, 0], [0, 0]]]})");
    CHECK(error_field(bad) == "model.observable");
}

TEST_CASE("serialization is canonical and round trips", "[config]") {
    const auto cfg = parse_config(kFullDoc);
    const std::string bytes = serialize_config(cfg);
    const auto reparsed = parse_config(bytes);
    CHECK(reparsed == cfg);
    CHECK(serialize_config(reparsed) == bytes);

    // keyword canonicalization: the explicit ground matrix serializes back to
    // the keyword, so both spellings hash identically
    std::string explicit_beta = kFullDoc;
    explicit_beta.replace(explicit_beta.find("\"ground\""), 8,
                          "[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]");
    CHECK(serialize_config(parse_config(explicit_beta)) == bytes);
    CHECK(config_hash(parse_config(explicit_beta)) == config_hash(cfg));
}

TEST_CASE("config hash is stable and sensitive", "[config]") {
    const auto a = parse_config(kFullDoc);
    auto b = parse_config(kFullDoc);
    CHECK(config_hash(a) == config_hash(b));
    b.run.seed += 1;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.model.C = Mat2::zero();
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("seventeen significant digits round trip through text", "[io]") {
    for (double v : {1.0 / 3.0, 0.1, 1e-300, 0.0, -2.5e17, 0.9900500000000001}) {
        const std::string s = fmt17(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("csv writers: headers, shape, determinism", "[io]") {
    TrajectoryPath path;
    path.grid = {0.0, 0.5};
    path.states = {diag2(1.0, 0.0), diag2(0.0, 1.0)};
    path.counting = {0, 1};
    const std::string csv = csv_trajectory(path);
    CHECK(csv.rfind("t,re00,im00,re01,im01,re10,im10,re11,im11,jumps\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv == csv_trajectory(path));

    ConvergenceReport rep;
    rep.rows.resize(1);
    rep.rows[0].n = 8;
    rep.rows[0].A = {0.5, 0.01};
    rep.rows[0].S = {0.4, 0.01};
    rep.rows[0].B = {0.9, 0.02};
    rep.rows[0].Z = {0.3, 0.01};
    rep.A_times_n = {4.0};
    const std::string table = csv_error_table(rep);
    CHECK(table.rfind("n,A,A_se,S,S_se,B,B_se,Z,Z_se,A_times_n\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);
    CHECK(table.find("\n8,0.5,0.01,") != std::string::npos);
}

TEST_CASE("text files round trip and errors carry the path", "[io]") {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / "qjump_test_io.txt";
    const std::string payload = "line one\nline two 0.99005\n";
    write_text_file(p, payload);
    CHECK(read_text_file(p) == payload);
    fs::remove(p);

    const fs::path missing = fs::temp_directory_path() / "qjump_missing_dir_31337" / "x.txt";
    CHECK_THROWS_WITH(read_text_file(missing),
                      Catch::Matchers::ContainsSubstring("x.txt"));
    CHECK_THROWS_WITH(write_text_file(missing, "y"),
                      Catch::Matchers::ContainsSubstring("x.txt"));
}
