#pragma once

// Experiment orchestration behind the CLI subcommands. Each runner consumes a
// validated config, writes its artifacts under output.directory, and returns
// the check lines the CLI prints. Everything is deterministic in
// (config, seed): worker count only changes wall time, file bytes never.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "qjump/chain.hpp"
#include "qjump/config.hpp"
#include "qjump/coupling.hpp"
#include "qjump/euler.hpp"
#include "qjump/flow.hpp"
#include "qjump/io.hpp"
#include "qjump/matrix.hpp"
#include "qjump/model.hpp"
#include "qjump/parallel.hpp"
#include "qjump/poisson.hpp"
#include "qjump/rng.hpp"
#include "qjump/stats.hpp"
#include "qjump/trajectory.hpp"

namespace qjump {

inline constexpr const char* version_string = "qjump 0.1.0";

struct CheckLine {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct HarnessOutcome {
    bool pass = true;
    std::vector<CheckLine> checks;
    std::vector<std::string> files;  // paths written, relative to the out dir
};

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Ginibre-style random density matrix: rho = G G* / Tr(G G*).
inline Mat2 random_state(RngStream& rng) {
    const auto gauss = [&rng] {
        const double u1 = rng.uniform01_open();
        const double u2 = rng.uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    };
    Mat2 g;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) g(r, c) = cplx{gauss(), gauss()};
    Mat2 rho = g * adjoint(g);
    const double tr = trace(rho).real();
    if (tr < 1e-12) return diag2(1.0, 0.0);
    return rho * cplx{1.0 / tr, 0.0};
}

namespace detail_harness {

inline std::vector<double> reporting_grid(double T, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = T * static_cast<double>(i) / (points - 1);
    return g;
}

inline void emit(HarnessOutcome& out, const std::filesystem::path& dir, const std::string& name,
                 const std::string& content) {
    write_text_file(dir / name, content);
    out.files.push_back(name);
}

inline nlohmann::json slope_to_json(const BootstrapSlope& s) {
    nlohmann::json j;
    j["slope"] = s.slope_point;
    j["ci_lo"] = s.ci_lo;
    j["ci_hi"] = s.ci_hi;
    j["monotone_confidence"] = s.monotone_confidence;
    return j;
}

}  // namespace detail_harness

inline HarnessOutcome run_trajectories(const ExperimentConfig& cfg, int workers) {
    namespace fs = std::filesystem;
    cfg.model.validate();
    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    HarnessOutcome out;

    const FlowParams params(cfg.model.H, cfg.model.C);
    const auto grid = detail_harness::reporting_grid(cfg.run.T, cfg.run.grid_points);

    MeanPath mp;
    const bool have_mean = cfg.run.n_paths >= 2;
    if (have_mean)
        mp = monte_carlo_mean(params, cfg.rho0, cfg.run.T, grid, cfg.run.n_paths, cfg.run.seed,
                              workers);

    const int n_files = std::min(cfg.run.n_paths, cfg.run.path_files);
    char name[64];
    for (int i = 0; i < n_files; ++i) {
        RngStream rng(cfg.run.seed, stream_id(StreamPurpose::realization, i));
        const auto r = sample_realization(params.K + 1.0, cfg.run.T, rng);
        const auto path = solve_path(cfg.rho0, r, params, grid);
        if (cfg.output.csv) {
            std::snprintf(name, sizeof name, "path_%06d.csv", i);
            detail_harness::emit(out, dir, name, csv_trajectory(path));
        }
        std::snprintf(name, sizeof name, "realization_%06d.txt", i);
        detail_harness::emit(out, dir, name, serialize_realization(r));
    }
    if (cfg.output.csv && have_mean) detail_harness::emit(out, dir, "mean.csv", csv_mean(mp));

    // Discrete-chain ensemble at the first resolution, same path count.
    const int n = cfg.run.n_grid.front();
    const int steps = static_cast<int>(std::floor(n * cfg.run.T + 1e-9));
    std::vector<Mat2> chain_sum(steps + 1, Mat2::zero());
    std::vector<Mat2> chain_sq(steps + 1, Mat2::zero());  // entrywise |.|^2 accumulators, Re/Im split
    std::vector<Mat2> chain_sq_im(steps + 1, Mat2::zero());
    {
        std::vector<std::vector<Mat2>> slots(cfg.run.n_paths);
        parallel_for(static_cast<std::size_t>(cfg.run.n_paths), workers, [&](std::size_t i) {
            RngStream rng(cfg.run.seed, stream_id(StreamPurpose::chain, i));
            slots[i] = simulate_chain(cfg.model, n, cfg.run.T, cfg.rho0, rng, cfg.run.mode).states;
        });
        for (const auto& states : slots)
            for (int k = 0; k <= steps; ++k)
                for (int r = 0; r < 2; ++r)
                    for (int c = 0; c < 2; ++c) {
                        const cplx z = states[k](r, c);
                        chain_sum[k](r, c) += z;
                        chain_sq[k](r, c) += z.real() * z.real();
                        chain_sq_im[k](r, c) += z.imag() * z.imag();
                    }
    }
    std::vector<double> chain_grid(steps + 1);
    std::vector<Mat2> chain_mean(steps + 1), chain_se(steps + 1, Mat2::zero());
    const double np = cfg.run.n_paths;
    for (int k = 0; k <= steps; ++k) {
        chain_grid[k] = static_cast<double>(k) / n;
        chain_mean[k] = chain_sum[k] * cplx{1.0 / np, 0.0};
        if (cfg.run.n_paths >= 2)
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    const cplx m = chain_mean[k](r, c);
                    const double vr = std::max(
                        0.0, (chain_sq[k](r, c).real() - np * m.real() * m.real()) / (np - 1.0));
                    const double vi = std::max(
                        0.0,
                        (chain_sq_im[k](r, c).real() - np * m.imag() * m.imag()) / (np - 1.0));
                    chain_se[k](r, c) = std::sqrt((vr + vi) / np);
                }
    }
    if (cfg.output.csv)
        detail_harness::emit(out, dir, "chain_mean.csv",
                             csv_state_mean(chain_grid, chain_mean, chain_se));

    if (cfg.output.json) {
        nlohmann::json j;
        j["version"] = version_string;
        j["command"] = "trajectories";
        j["config"] = nlohmann::json::parse(serialize_config(cfg));
        j["config_hash"] = hex64(config_hash(cfg));
        j["seed"] = cfg.run.seed;
        j["n_paths"] = cfg.run.n_paths;
        if (have_mean) {
            std::vector<double> jumps(mp.jumps_per_path.begin(), mp.jumps_per_path.end());
            const auto jm = mean_stderr(jumps);
            const auto cm = mean_stderr(mp.compensator_per_path);
            j["jumps_mean"] = jm.mean;
            j["jumps_stderr"] = jm.stderr_mean;
            j["compensator_mean"] = cm.mean;
            j["compensator_stderr"] = cm.stderr_mean;
        }
        j["files"] = out.files;
        detail_harness::emit(out, dir, "trajectories.json", j.dump(2) + "\n");
    }
    return out;
}

inline HarnessOutcome run_convergence(const ExperimentConfig& cfg, int workers) {
    namespace fs = std::filesystem;
    if (cfg.run.n_grid.size() < 4)
        throw ConfigError("run.n_grid", "need >= 4 octave-spanning n values");
    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    HarnessOutcome out;

    const auto rep = convergence_report(cfg.model, cfg.rho0, cfg.run.T, cfg.run.n_grid,
                                        cfg.run.n_paths, cfg.run.seed, 2000, cfg.run.mode,
                                        workers);
    const int sup_paths = std::min(cfg.run.n_paths, 500);
    const SupErrorEstimate sup =
        euler_sup_error(cfg.rho0, FlowParams(cfg.model.H, cfg.model.C), cfg.run.n_grid.front(),
                        cfg.run.T, sup_paths, cfg.run.seed, workers);

    const auto window = [](double s) { return s >= -1.35 && s <= -0.65; };
    if (rep.degenerate) {
        out.checks.push_back({"degenerate-model", true,
                              "coupling operator carries no jump activity; slopes not fitted"});
    } else if (!rep.fitted) {
        out.checks.push_back({"slope-fit", false, "error means too small to fit log-log slopes"});
    } else {
        char d[160];
        std::snprintf(d, sizeof d, "slope %.3f, ci [%.3f, %.3f]", rep.slope_Z.slope_point,
                      rep.slope_Z.ci_lo, rep.slope_Z.ci_hi);
        out.checks.push_back({"euler-rate-window", window(rep.slope_Z.slope_point), d});
        std::snprintf(d, sizeof d, "confidence %.4f", rep.slope_Z.monotone_confidence);
        out.checks.push_back(
            {"euler-rate-monotone", rep.slope_Z.monotone_confidence >= 0.99, d});
        std::snprintf(d, sizeof d, "slope %.3f, ci [%.3f, %.3f]", rep.slope_B.slope_point,
                      rep.slope_B.ci_lo, rep.slope_B.ci_hi);
        out.checks.push_back({"chain-rate-window", window(rep.slope_B.slope_point), d});
        std::snprintf(d, sizeof d, "confidence %.4f", rep.slope_B.monotone_confidence);
        out.checks.push_back(
            {"chain-rate-monotone", rep.slope_B.monotone_confidence >= 0.99, d});
    }
    out.checks.push_back({"triangle-audit", rep.triangle_ok,
                          "per-path sup(chain-vs-exact) <= A + S + Z"});
    out.checks.push_back({"realization-hash-audit", rep.hash_ok,
                          "stream regeneration reproduces every realization"});
    for (const auto& c : out.checks) out.pass = out.pass && c.pass;

    if (cfg.output.csv) detail_harness::emit(out, dir, "error_table.csv", csv_error_table(rep));
    if (cfg.output.json) {
        nlohmann::json j;
        j["version"] = version_string;
        j["command"] = "convergence";
        j["config"] = nlohmann::json::parse(serialize_config(cfg));
        j["config_hash"] = hex64(config_hash(cfg));
        j["seed"] = cfg.run.seed;
        j["n_paths"] = rep.n_paths;
        j["degenerate"] = rep.degenerate;
        j["fitted"] = rep.fitted;
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t g = 0; g < rep.rows.size(); ++g) {
            nlohmann::json r;
            r["n"] = rep.rows[g].n;
            r["A"] = rep.rows[g].A.mean;
            r["A_se"] = rep.rows[g].A.stderr_mean;
            r["S"] = rep.rows[g].S.mean;
            r["S_se"] = rep.rows[g].S.stderr_mean;
            r["B"] = rep.rows[g].B.mean;
            r["B_se"] = rep.rows[g].B.stderr_mean;
            r["Z"] = rep.rows[g].Z.mean;
            r["Z_se"] = rep.rows[g].Z.stderr_mean;
            r["A_times_n"] = rep.A_times_n[g];
            rows.push_back(r);
        }
        j["rows"] = rows;
        if (rep.fitted) {
            j["slopes"]["B"] = detail_harness::slope_to_json(rep.slope_B);
            j["slopes"]["Z"] = detail_harness::slope_to_json(rep.slope_Z);
            j["slopes"]["S"] = detail_harness::slope_to_json(rep.slope_S);
        }
        j["euler_sup"]["n"] = cfg.run.n_grid.front();
        j["euler_sup"]["paths"] = sup_paths;
        j["euler_sup"]["mean"] = sup.mean;
        j["euler_sup"]["stderr"] = sup.stderr_mean;
        j["audits"]["triangle_ok"] = rep.triangle_ok;
        j["audits"]["hash_ok"] = rep.hash_ok;
        nlohmann::json checks = nlohmann::json::array();
        for (const auto& c : out.checks) {
            nlohmann::json cj;
            cj["name"] = c.name;
            cj["pass"] = c.pass;
            cj["detail"] = c.detail;
            checks.push_back(cj);
        }
        j["checks"] = checks;
        j["pass"] = out.pass;
        detail_harness::emit(out, dir, "report.json", j.dump(2) + "\n");
    }
    return out;
}

struct AuditHooks {
    const UnitaryBlocks* inject_blocks = nullptr;  // negative-control override
    bool empty_realization = false;                // drive non-explosion with no points
};

inline HarnessOutcome run_audit(const ExperimentConfig& cfg, int workers,
                                const AuditHooks& hooks = {}) {
    cfg.model.validate();
    HarnessOutcome out;
    const FlowParams params(cfg.model.H, cfg.model.C);
    const double T = cfg.run.T;
    const int n_front = cfg.run.n_grid.front();
    char d[200];

    {  // state validity along exact paths and along the chain
        double worst = 0.0;
        const auto grid = detail_harness::reporting_grid(T, 201);
        const int paths = 32;
        const auto state_defect = [](const Mat2& s) {
            const auto v = validate_state(s, 1e-6);
            return std::max({v.hermiticity_defect, v.trace_defect,
                             std::max(0.0, -v.min_eigenvalue)});
        };
        std::vector<double> worst_slot(paths, 0.0);
        parallel_for(paths, workers, [&](std::size_t i) {
            RngStream rng(cfg.run.seed, stream_id(StreamPurpose::realization, i));
            const auto r = sample_realization(params.K + 1.0, T, rng);
            const auto path = solve_path(cfg.rho0, r, params, grid);
            double w = 0.0;
            for (const auto& s : path.states) w = std::max(w, state_defect(s));
            RngStream crng(cfg.run.seed, stream_id(StreamPurpose::chain, i));
            const auto hist = simulate_chain(cfg.model, n_front, T, cfg.rho0, crng, cfg.run.mode);
            for (const auto& s : hist.states) w = std::max(w, state_defect(s));
            worst_slot[i] = w;
        });
        for (double w : worst_slot) worst = std::max(worst, w);
        std::snprintf(d, sizeof d, "worst defect %.3g (tolerance 1e-6)", worst);
        out.checks.push_back({"state-validity", worst <= 1e-6, d});
    }

    {  // trace preservation of the transition pair (negative-control hook here)
        const UnitaryBlocks blocks = hooks.inject_blocks
                                         ? *hooks.inject_blocks
                                         : build_unitary(cfg.model, n_front, BlockMode::exact);
        const TransitionMaps maps(blocks, cfg.model.observable, cfg.model.beta);
        RngStream rng(cfg.run.seed, stream_id(StreamPurpose::state_sampling, 0));
        double worst = blocks.unitarity_defect();
        for (int i = 0; i < 100; ++i) {
            const auto m = maps.apply(random_state(rng));
            worst = std::max(worst, std::abs(trace(m.M0).real() + trace(m.M1).real() - 1.0));
        }
        std::snprintf(d, sizeof d, "worst defect %.3g (tolerance 1e-10)", worst);
        out.checks.push_back({"trace-preservation", worst <= 1e-10, d});
    }

    {  // void-probability identity, exact blocks, n in {10, 100}
        double worst = 0.0;
        RngStream rng(cfg.run.seed, stream_id(StreamPurpose::state_sampling, 1));
        for (const int n : {10, 100}) {
            const auto blocks = build_unitary(cfg.model, n, BlockMode::exact);
            const TransitionMaps maps(blocks, cfg.model.observable, cfg.model.beta);
            for (int i = 0; i < 1000; ++i) {
                const Mat2 rho = random_state(rng);
                const auto m = maps.apply(rho);
                const double p = std::min(std::max(trace(m.M0).real(), 0.0), 1.0);
                const double height = (p >= 1.0) ? 0.0 : -static_cast<double>(n) * std::log(p);
                const double p_detect = 1.0 - std::exp(-height / n);
                worst = std::max(worst, std::abs(p_detect - (1.0 - p)));
            }
        }
        std::snprintf(d, sizeof d, "worst defect %.3g (tolerance 1e-12)", worst);
        out.checks.push_back({"void-probability", worst <= 1e-12, d});
    }

    {  // purity preservation for pure initial data; post-jump purity for rank-1 C
        const PureState x0{cplx{0.0, 0.0}, cplx{1.0, 0.0}};
        const Mat2 rho0 = projector_from_vector(x0);
        const auto grid = detail_harness::reporting_grid(T, 101);
        double worst = 0.0;
        for (int i = 0; i < 16; ++i) {
            RngStream rng(cfg.run.seed, stream_id(StreamPurpose::realization, 4096 + i));
            const auto r = sample_realization(params.K + 1.0, T, rng);
            const auto path = solve_path(rho0, r, params, grid);
            for (const auto& s : path.states)
                worst = std::max(worst, frobenius_norm(s * s - s));
            const Mat2 cdc = adjoint(cfg.model.C) * cfg.model.C;
            const bool rank_one = std::sqrt(std::max(0.0, eig2_hermitian(cdc).lo)) <= 1e-10 &&
                                  frobenius_norm(cfg.model.C) > tol_prob;
            if (rank_one)
                for (const auto& s : path.jump_states)
                    worst = std::max(worst, frobenius_norm(s * s - s));
        }
        std::snprintf(d, sizeof d, "worst purity defect %.3g (tolerance 1e-6)", worst);
        out.checks.push_back({"purity-absorption", worst <= 1e-6, d});
    }

    {  // non-explosion: E[N_T] matches the compensator and respects K T
        if (hooks.empty_realization) {
            PoissonRealization r;
            r.T = T;
            r.K = params.K + 1.0;
            const auto grid = detail_harness::reporting_grid(T, 11);
            const auto path = solve_path(cfg.rho0, r, params, grid);
            const bool ok = path.counting.back() == 0;
            out.checks.push_back({"non-explosion", ok, "empty realization produced no jumps"});
        } else {
            const auto grid = detail_harness::reporting_grid(T, 2);
            const int paths = std::min(cfg.run.n_paths, 2000);
            const auto mp = monte_carlo_mean(params, cfg.rho0, T, grid, std::max(paths, 2),
                                             cfg.run.seed, workers);
            std::vector<double> jumps(mp.jumps_per_path.begin(), mp.jumps_per_path.end());
            const auto jm = mean_stderr(jumps);
            const auto cm = mean_stderr(mp.compensator_per_path);
            const double se = std::max(1e-12, std::hypot(jm.stderr_mean, cm.stderr_mean));
            const bool match = std::abs(jm.mean - cm.mean) <= 4.0 * se;
            const bool bounded = jm.mean <= params.K * T + 4.0 * std::max(jm.stderr_mean, 1e-12);
            std::snprintf(d, sizeof d,
                          "E[N]=%.4f, E[compensator]=%.4f, bound %.4f", jm.mean, cm.mean,
                          params.K * T);
            out.checks.push_back({"non-explosion", match && bounded, d});
        }
    }

    {  // marginal equality of the coupled and direct chains
        if (!cfg.model.observable.is_diagonal()) {
            out.checks.push_back(
                {"marginal-equality", true, "skipped: requires the diagonal observable"});
        } else {
            const int steps = static_cast<int>(std::floor(n_front * T + 1e-9));
            const int m = std::min(6, steps);
            if (m < 1) {
                out.checks.push_back({"marginal-equality", true, "skipped: no chain steps"});
            } else {
                const auto res =
                    marginal_equality_test(cfg.model, cfg.rho0, n_front, T, m,
                                           std::min(cfg.run.n_paths, 5000), cfg.run.seed,
                                           cfg.run.mode, workers);
                std::snprintf(d, sizeof d, "chi2 %.3f, dof %d, p %.4f", res.chi.statistic,
                              res.chi.dof, res.chi.p_value);
                out.checks.push_back({"marginal-equality", res.chi.p_value > 0.01, d});
            }
        }
    }

    for (const auto& c : out.checks) out.pass = out.pass && c.pass;
    return out;
}

inline HarnessOutcome run_replay(const ExperimentConfig& cfg, int workers) {
    namespace fs = std::filesystem;
    (void)workers;  // one realization; nothing to fan out
    cfg.model.validate();
    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    HarnessOutcome out;

    const FlowParams params(cfg.model.H, cfg.model.C);
    const fs::path rpath = dir / "realization.txt";
    PoissonRealization r;
    if (fs::exists(rpath)) {
        r = parse_realization(read_text_file(rpath));
        if (std::abs(r.T - cfg.run.T) > 1e-12)
            throw std::runtime_error("replay: realization horizon does not match run.T");
        out.files.push_back("realization.txt");
    } else {
        RngStream rng(cfg.run.seed, stream_id(StreamPurpose::realization, 0));
        r = sample_realization(params.K + 1.0, cfg.run.T, rng);
        detail_harness::emit(out, dir, "realization.txt", serialize_realization(r));
    }

    const int n = cfg.run.n_grid.front();
    const auto run = run_coupled(cfg.model, cfg.rho0, n, cfg.run.T, r, cfg.run.mode);

    std::string csv =
        "k,t,nu_chain,nu_intermediate,height_chain,height_intermediate,"
        "d_chain_intermediate,d_euler_intermediate,d_chain_exact,d_euler_exact\n";
    for (int k = 0; k <= run.steps; ++k) {
        const Mat2 th = run.euler.report(k);
        const Mat2& mu = run.exact.states[static_cast<std::size_t>(k)];
        csv += std::to_string(k);
        csv += ',';
        csv += fmt17(static_cast<double>(k) / n);
        csv += ',';
        csv += k > 0 ? std::to_string(run.coupled_outcomes[k - 1]) : "0";
        csv += ',';
        csv += k > 0 ? std::to_string(run.intermediate_outcomes[k - 1]) : "0";
        csv += ',';
        csv += fmt17(k > 0 ? run.coupled_heights[k - 1] : 0.0);
        csv += ',';
        csv += fmt17(k > 0 ? run.intermediate_heights[k - 1] : 0.0);
        csv += ',';
        csv += fmt17(frobenius_norm(run.coupled_states[k] - run.intermediate_states[k]));
        csv += ',';
        csv += fmt17(frobenius_norm(th - run.intermediate_states[k]));
        csv += ',';
        csv += fmt17(frobenius_norm(run.coupled_states[k] - mu));
        csv += ',';
        csv += fmt17(frobenius_norm(th - mu));
        csv += '\n';
    }
    if (cfg.output.csv) detail_harness::emit(out, dir, "replay.csv", csv);
    if (cfg.output.json) {
        nlohmann::json j;
        j["version"] = version_string;
        j["command"] = "replay";
        j["config_hash"] = hex64(config_hash(cfg));
        j["n"] = n;
        j["realization_hash"] = hex64(run.realization_hash_value);
        j["supA"] = run.supA;
        j["supS"] = run.supS;
        j["supB"] = run.supB;
        j["supZ"] = run.supZ;
        j["triangle_ok"] = run.triangle_ok;
        detail_harness::emit(out, dir, "replay.json", j.dump(2) + "\n");
    }
    char d[200];
    std::snprintf(d, sizeof d, "supA %.3g, supS %.3g, supB %.3g, supZ %.3g", run.supA, run.supS,
                  run.supB, run.supZ);
    out.checks.push_back({"replay-triangle", run.triangle_ok, d});
    out.pass = run.triangle_ok;
    return out;
}

}  // namespace qjump
