#pragma once

// Couples the four processes of interest to one Poisson realization per path:
//
//   rho~  discrete chain whose detection flag is "any point under the step
//         rectangle [k/n,(k+1)/n) x [0, -n ln p_k]" (void probability p_k),
//   rho-  same update maps, rectangle height frozen at the continuous
//         intensity Re Tr J(rho-_k),
//   theta Euler scheme on the same realization,
//   mu    exact jump trajectory on the same realization.
//
// With common random numbers the path-wise sups
//   A = sup || rho~ - rho- ||,  S = sup || theta - rho- ||,
//   B = sup || rho~ - mu ||,    Z = sup || theta - mu ||
// satisfy B <= A + S + Z path by path on the grid, which the runner audits.
// The chain-vs-coupled marginal equality is exact by construction (the void
// probability of the rectangle is exp(-(1/n) n ln(1/p)) = p), so its
// chi-square test is a bug detector, not an approximation check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qjump/chain.hpp"
#include "qjump/euler.hpp"
#include "qjump/flow.hpp"
#include "qjump/matrix.hpp"
#include "qjump/model.hpp"
#include "qjump/parallel.hpp"
#include "qjump/poisson.hpp"
#include "qjump/rng.hpp"
#include "qjump/stats.hpp"
#include "qjump/trajectory.hpp"

namespace qjump {

struct CoupledStepResult {
    Mat2 state;
    int outcome = 0;
    double p = 1.0;       // void probability of this step's rectangle
    double height = 0.0;  // rectangle height actually used
};

namespace detail {

// Shared with the direct chain in spirit: identical branch normalization so
// the two samplers differ only in how the detection flag is drawn.
inline Mat2 normalize_branch(const Mat2& branch, double tr) {
    if (tr < tol_prob)
        throw std::runtime_error("coupled step: selected branch has vanishing trace");
    Mat2 out = branch * cplx{1.0 / tr, 0.0};
    out *= cplx{1.0 / trace(out).real(), 0.0};
    return out;
}

inline CoupledStepResult rectangle_step(const Mat2& rho, const PoissonRealization& r, int k,
                                        int n, const TransitionMaps& maps, double height,
                                        double p_void) {
    if (height > r.K + 1e-9)
        throw std::runtime_error("coupled step: rectangle exceeds the realization mark bound");
    CoupledStepResult res;
    res.p = p_void;
    res.height = height;
    const double h = 1.0 / static_cast<double>(n);
    res.outcome = (height > tol_prob && count_in_rectangle(r, k * h, (k + 1) * h, 0.0, height) > 0)
                      ? 1
                      : 0;
    const auto m = maps.apply(rho);
    const Mat2& branch = res.outcome ? m.M1 : m.M0;
    res.state = normalize_branch(branch, trace(branch).real());
    return res;
}

}  // namespace detail

// Chain step driven by the realization: height -n ln(1 - Tr M1), so the void
// probability equals the direct chain's no-click probability p exactly.
inline CoupledStepResult coupled_discrete_step(const Mat2& rho, const PoissonRealization& r,
                                               int k, int n, const TransitionMaps& maps) {
    const auto m = maps.apply(rho);
    const double q = std::min(std::max(trace(m.M1).real(), 0.0), 1.0);
    const double p = 1.0 - q;
    if (p < 1e-300)
        throw std::runtime_error("coupled_discrete_step: void probability underflow");
    const double height = (p >= 1.0) ? 0.0 : -static_cast<double>(n) * std::log(p);
    return detail::rectangle_step(rho, r, k, n, maps, height, p);
}

// Same update maps, but the rectangle height is the continuous-time intensity
// at the current iterate.
inline CoupledStepResult intermediate_step(const Mat2& rho, const PoissonRealization& r, int k,
                                           int n, const TransitionMaps& maps,
                                           const FlowParams& params) {
    const double height = std::max(0.0, jump_intensity(params, rho));
    const double p = std::exp(-height / static_cast<double>(n));
    return detail::rectangle_step(rho, r, k, n, maps, height, p);
}

struct CoupledRun {
    int n = 1;
    int steps = 0;
    double T = 0.0;
    std::uint64_t realization_hash_value = 0;
    std::vector<Mat2> coupled_states;  // size steps+1
    std::vector<Mat2> intermediate_states;
    std::vector<int> coupled_outcomes;  // size steps
    std::vector<int> intermediate_outcomes;
    std::vector<double> coupled_heights;
    std::vector<double> intermediate_heights;
    EulerPath euler;
    TrajectoryPath exact;  // sampled on the k/n grid
    double supA = 0.0, supS = 0.0, supB = 0.0, supZ = 0.0;
    bool triangle_ok = true;
};

inline void require_diagonal_observable(const ModelSpec& spec, const char* who) {
    if (!spec.observable.is_diagonal())
        throw std::invalid_argument(std::string(who) +
                                    ": the coupling analysis requires the diagonal observable");
}

inline CoupledRun run_coupled(const ModelSpec& spec, const Mat2& rho0, int n, double T,
                              const PoissonRealization& r,
                              BlockMode mode = BlockMode::asymptotic) {
    spec.validate();
    require_diagonal_observable(spec, "run_coupled");
    if (!(T > 0.0) || n < 1) throw std::invalid_argument("run_coupled: need n >= 1, T > 0");
    const auto blocks = build_unitary(spec, n, mode);
    const TransitionMaps maps(blocks, spec.observable, spec.beta);
    const FlowParams params(spec.H, spec.C);
    const JumpFunctionSpec jf = build_jump_function(spec.C);

    CoupledRun run;
    run.n = n;
    run.T = T;
    run.steps = static_cast<int>(std::floor(n * T + 1e-9));
    run.realization_hash_value = realization_hash(r);

    std::vector<double> grid(run.steps + 1);
    for (int k = 0; k <= run.steps; ++k) grid[k] = static_cast<double>(k) / n;
    run.exact = solve_path(rho0, r, params, grid);
    run.euler = euler_path(rho0, r, n, T, jf, params);

    run.coupled_states.reserve(run.steps + 1);
    run.intermediate_states.reserve(run.steps + 1);
    run.coupled_states.push_back(rho0);
    run.intermediate_states.push_back(rho0);
    for (int k = 0; k < run.steps; ++k) {
        const auto c = coupled_discrete_step(run.coupled_states.back(), r, k, n, maps);
        const auto b = intermediate_step(run.intermediate_states.back(), r, k, n, maps, params);
        run.coupled_states.push_back(c.state);
        run.intermediate_states.push_back(b.state);
        run.coupled_outcomes.push_back(c.outcome);
        run.intermediate_outcomes.push_back(b.outcome);
        run.coupled_heights.push_back(c.height);
        run.intermediate_heights.push_back(b.height);
    }

    for (int k = 0; k <= run.steps; ++k) {
        const Mat2 th = run.euler.report(k);
        const Mat2& mu = run.exact.states[static_cast<std::size_t>(k)];
        run.supA = std::max(run.supA, frobenius_norm(run.coupled_states[k] -
                                                     run.intermediate_states[k]));
        run.supS = std::max(run.supS, frobenius_norm(th - run.intermediate_states[k]));
        run.supB = std::max(run.supB, frobenius_norm(run.coupled_states[k] - mu));
        run.supZ = std::max(run.supZ, frobenius_norm(th - mu));
    }
    const double t_end = static_cast<double>(run.steps) / n;
    for (std::size_t j = 0; j < run.exact.jump_times.size(); ++j) {
        const double tau = run.exact.jump_times[j];
        if (tau > t_end) continue;
        run.supZ = std::max(run.supZ, frobenius_norm(run.euler.interp_report(r, tau) -
                                                     run.exact.jump_states[j]));
    }
    run.triangle_ok = run.supB <= run.supA + run.supS + run.supZ + 1e-12;
    return run;
}

struct MarginalTestResult {
    ChiSquareResult chi;
    int m = 0;
    int n = 0;
    int n_paths = 0;
    std::vector<std::int64_t> direct_counts;
    std::vector<std::int64_t> coupled_counts;
};

// Compares the law of the first m detection flags between the direct chain
// (inverse-transform sampling) and the realization-driven coupled chain.
inline MarginalTestResult marginal_equality_test(const ModelSpec& spec, const Mat2& rho0, int n,
                                                 double T, int m, int n_paths,
                                                 std::uint64_t seed,
                                                 BlockMode mode = BlockMode::asymptotic,
                                                 int workers = 1) {
    spec.validate();
    require_diagonal_observable(spec, "marginal_equality_test");
    const int steps = static_cast<int>(std::floor(n * T + 1e-9));
    if (m < 1 || m > 20 || m > steps)
        throw std::invalid_argument("marginal_equality_test: need 1 <= m <= min(20, n T)");
    if (n_paths < 2) throw std::invalid_argument("marginal_equality_test: need paths");
    const auto blocks = build_unitary(spec, n, mode);
    const TransitionMaps maps(blocks, spec.observable, spec.beta);
    const FlowParams params(spec.H, spec.C);

    std::vector<std::uint32_t> direct_idx(n_paths), coupled_idx(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t i) {
        RngStream chain_rng(seed, stream_id(StreamPurpose::chain, i));
        Mat2 rho = rho0;
        std::uint32_t word = 0;
        for (int j = 0; j < m; ++j) {
            const auto s = chain_step(rho, maps, chain_rng);
            rho = s.state;
            word |= static_cast<std::uint32_t>(s.outcome) << j;
        }
        direct_idx[i] = word;

        RngStream real_rng(seed, stream_id(StreamPurpose::realization, i));
        const auto r = sample_realization(params.K + 1.0, T, real_rng);
        rho = rho0;
        word = 0;
        for (int j = 0; j < m; ++j) {
            const auto s = coupled_discrete_step(rho, r, j, n, maps);
            rho = s.state;
            word |= static_cast<std::uint32_t>(s.outcome) << j;
        }
        coupled_idx[i] = word;
    });

    MarginalTestResult res;
    res.m = m;
    res.n = n;
    res.n_paths = n_paths;
    res.direct_counts.assign(std::size_t{1} << m, 0);
    res.coupled_counts.assign(std::size_t{1} << m, 0);
    for (int i = 0; i < n_paths; ++i) {
        ++res.direct_counts[direct_idx[i]];
        ++res.coupled_counts[coupled_idx[i]];
    }
    res.chi = chi_square_homogeneity(res.direct_counts, res.coupled_counts);
    return res;
}

struct ErrorRow {
    int n = 0;
    MeanStderr A, S, B, Z;
};

struct ConvergenceReport {
    std::vector<int> ns;
    std::vector<ErrorRow> rows;
    bool degenerate = false;  // coupling operator carries no jump activity
    bool fitted = false;
    BootstrapSlope slope_B, slope_Z, slope_S;
    std::vector<double> A_times_n;
    bool triangle_ok = true;
    bool hash_ok = true;
    int n_paths = 0;
    // Per-path sup tables, [grid index][path index], kept for reuse.
    std::vector<std::vector<double>> supA, supS, supB, supZ;
};

// Runs the coupled quadruple over a grid of chain resolutions with common
// random numbers: path i uses one realization for every n, and the exact
// trajectory is solved once per path on the union of all reporting grids.
inline ConvergenceReport convergence_report(const ModelSpec& spec, const Mat2& rho0, double T,
                                            const std::vector<int>& ns, int n_paths,
                                            std::uint64_t seed, int n_resamples = 2000,
                                            BlockMode mode = BlockMode::asymptotic,
                                            int workers = 1) {
    spec.validate();
    require_diagonal_observable(spec, "convergence_report");
    if (ns.empty()) throw std::invalid_argument("convergence_report: empty resolution grid");
    for (std::size_t g = 1; g < ns.size(); ++g)
        if (ns[g] <= ns[g - 1])
            throw std::invalid_argument("convergence_report: resolutions must increase");
    if (ns.front() < 1) throw std::invalid_argument("convergence_report: n >= 1 required");
    if (n_paths < 2) throw std::invalid_argument("convergence_report: need at least 2 paths");
    if (!(T > 0.0)) throw std::invalid_argument("convergence_report: T > 0 required");

    const std::size_t G = ns.size();
    const FlowParams params(spec.H, spec.C);
    const JumpFunctionSpec jf = build_jump_function(spec.C);

    std::vector<TransitionMaps> maps;
    maps.reserve(G);
    std::vector<int> steps(G);
    for (std::size_t g = 0; g < G; ++g) {
        maps.emplace_back(build_unitary(spec, ns[g], mode), spec.observable, spec.beta);
        steps[g] = static_cast<int>(std::floor(ns[g] * T + 1e-9));
    }

    // Union reporting grid and per-resolution index maps into it.
    std::vector<double> union_grid;
    for (std::size_t g = 0; g < G; ++g)
        for (int k = 0; k <= steps[g]; ++k)
            union_grid.push_back(static_cast<double>(k) / ns[g]);
    std::sort(union_grid.begin(), union_grid.end());
    union_grid.erase(std::unique(union_grid.begin(), union_grid.end()), union_grid.end());
    std::vector<std::vector<std::size_t>> at(G);
    for (std::size_t g = 0; g < G; ++g) {
        at[g].resize(steps[g] + 1);
        for (int k = 0; k <= steps[g]; ++k) {
            const double t = static_cast<double>(k) / ns[g];
            const auto it = std::lower_bound(union_grid.begin(), union_grid.end(), t);
            if (it == union_grid.end() || *it != t)
                throw std::logic_error("convergence_report: grid union lost a point");
            at[g][k] = static_cast<std::size_t>(it - union_grid.begin());
        }
    }

    ConvergenceReport rep;
    rep.ns = ns;
    rep.n_paths = n_paths;
    rep.supA.assign(G, std::vector<double>(n_paths, 0.0));
    rep.supS.assign(G, std::vector<double>(n_paths, 0.0));
    rep.supB.assign(G, std::vector<double>(n_paths, 0.0));
    rep.supZ.assign(G, std::vector<double>(n_paths, 0.0));
    std::vector<char> tri_ok(n_paths, 1), hashes_ok(n_paths, 1);

    parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t i) {
        RngStream rng(seed, stream_id(StreamPurpose::realization, i));
        const auto r = sample_realization(params.K + 1.0, T, rng);
        const std::uint64_t h0 = realization_hash(r);
        const auto exact = solve_path(rho0, r, params, union_grid);

        for (std::size_t g = 0; g < G; ++g) {
            // Stream-regeneration audit: re-drawing the same stream must
            // reproduce the realization bit for bit.
            RngStream again(seed, stream_id(StreamPurpose::realization, i));
            if (realization_hash(sample_realization(params.K + 1.0, T, again)) != h0)
                hashes_ok[i] = 0;

            const int n = ns[g];
            const auto eul = euler_path(rho0, r, n, T, jf, params);
            Mat2 tld = rho0, bar = rho0;
            double sA = 0.0, sS = 0.0, sB = 0.0, sZ = 0.0;
            for (int k = 0; k <= steps[g]; ++k) {
                if (k > 0) {
                    tld = coupled_discrete_step(tld, r, k - 1, n, maps[g]).state;
                    bar = intermediate_step(bar, r, k - 1, n, maps[g], params).state;
                }
                const Mat2 th = eul.report(k);
                const Mat2& mu = exact.states[at[g][static_cast<std::size_t>(k)]];
                sA = std::max(sA, frobenius_norm(tld - bar));
                sS = std::max(sS, frobenius_norm(th - bar));
                sB = std::max(sB, frobenius_norm(tld - mu));
                sZ = std::max(sZ, frobenius_norm(th - mu));
            }
            const double t_end = static_cast<double>(steps[g]) / n;
            for (std::size_t j = 0; j < exact.jump_times.size(); ++j) {
                const double tau = exact.jump_times[j];
                if (tau > t_end) continue;
                sZ = std::max(sZ, frobenius_norm(eul.interp_report(r, tau) -
                                                 exact.jump_states[j]));
            }
            rep.supA[g][i] = sA;
            rep.supS[g][i] = sS;
            rep.supB[g][i] = sB;
            rep.supZ[g][i] = sZ;
            if (sB > sA + sS + sZ + 1e-12) tri_ok[i] = 0;
        }
    });

    for (int i = 0; i < n_paths; ++i) {
        rep.triangle_ok = rep.triangle_ok && tri_ok[i];
        rep.hash_ok = rep.hash_ok && hashes_ok[i];
    }
    rep.rows.resize(G);
    rep.A_times_n.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        rep.rows[g].n = ns[g];
        rep.rows[g].A = mean_stderr(rep.supA[g]);
        rep.rows[g].S = mean_stderr(rep.supS[g]);
        rep.rows[g].B = mean_stderr(rep.supB[g]);
        rep.rows[g].Z = mean_stderr(rep.supZ[g]);
        rep.A_times_n[g] = rep.rows[g].A.mean * ns[g];
    }

    rep.degenerate = intensity_bound(spec.C) <= tol_prob;
    bool fit_possible = !rep.degenerate && G >= 2;
    for (std::size_t g = 0; fit_possible && g < G; ++g)
        fit_possible = rep.rows[g].S.mean > 0.0 && rep.rows[g].B.mean > 0.0 &&
                       rep.rows[g].Z.mean > 0.0;
    if (fit_possible) {
        rep.slope_B = bootstrap_loglog_slope(ns, rep.supB, n_resamples, seed,
                                             stream_id(StreamPurpose::bootstrap, 1));
        rep.slope_Z = bootstrap_loglog_slope(ns, rep.supZ, n_resamples, seed,
                                             stream_id(StreamPurpose::bootstrap, 2));
        rep.slope_S = bootstrap_loglog_slope(ns, rep.supS, n_resamples, seed,
                                             stream_id(StreamPurpose::bootstrap, 3));
        rep.fitted = true;
    }
    return rep;
}

}  // namespace qjump
