#pragma once

// Exact pathwise solution of the jump-Belavkin equation on one Poisson
// realization: integrate the nonlinear flow between realization points,
// evaluate the intensity at the left limit, accept the point iff its mark
// lies under the intensity, and on acceptance replace the state by the
// normalized jump target J(rho)/Tr[J(rho)].
//
// The solver is event-driven; grid output re-integrates the flow from the
// last event (never interpolates matrices linearly). States recorded at a
// grid time that coincides exactly with an accepted point time follow the
// cadlag convention: the value AT t is the post-jump state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qjump/flow.hpp"
#include "qjump/matrix.hpp"
#include "qjump/parallel.hpp"
#include "qjump/poisson.hpp"
#include "qjump/rng.hpp"

namespace qjump {

struct TrajectoryPath {
    std::vector<double> grid;
    std::vector<Mat2> states;          // one per grid time, cadlag
    std::vector<int> counting;         // N_t on the grid
    std::vector<double> jump_times;    // accepted point times
    std::vector<Mat2> jump_states;     // post-jump states, parallel to jump_times
    double compensator_T = 0.0;        // int_0^T Tr[J(rho_s)] ds along this path
    double max_trace_drift = 0.0;      // worst per-step integrator trace defect seen
};

inline Mat2 apply_jump(const FlowParams& p, const Mat2& rho) {
    const Mat2 j = jump_map(p, rho);
    const double tr = trace(j).real();
    if (!(tr > tol_prob))
        throw std::runtime_error("apply_jump: zero-intensity state (thinning accepted a point it must not)");
    Mat2 out = j * cplx{1.0 / tr, 0.0};
    out *= cplx{1.0 / trace(out).real(), 0.0};
    return out;
}

inline TrajectoryPath solve_path(const Mat2& rho0, const PoissonRealization& r,
                                 const FlowParams& params, const std::vector<double>& grid) {
    if (r.K + 1e-12 < params.K)
        throw std::invalid_argument("solve_path: realization height below the intensity bound");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] >= grid[i - 1])) throw std::invalid_argument("solve_path: grid not sorted");
    if (!grid.empty() && grid.back() > r.T + 1e-12)
        throw std::invalid_argument("solve_path: grid exceeds the realization horizon");

    TrajectoryPath path;
    path.grid = grid;
    path.states.reserve(grid.size());
    path.counting.reserve(grid.size());

    Mat2 rho = rho0;
    double t = 0.0;
    int n_jumps = 0;
    std::size_t gi = 0;

    auto advance = [&](double target) {
        if (target > t) {
            const auto res = integrate_flow(rho, target - t, params, &path.compensator_T);
            rho = res.state;
            path.max_trace_drift = std::max(path.max_trace_drift, res.trace_drift);
            t = target;
        }
    };
    auto emit_through = [&](double target) {
        // Record grid times strictly before target (flow values en route).
        while (gi < grid.size() && grid[gi] < target) {
            advance(grid[gi]);
            path.states.push_back(rho);
            path.counting.push_back(n_jumps);
            ++gi;
        }
    };

    for (const auto& [tau, xi] : r.points) {
        emit_through(tau);
        advance(tau);  // left limit at tau
        const double intensity = jump_intensity(params, rho);
        if (intensity > tol_prob && xi <= intensity) {
            rho = apply_jump(params, rho);
            ++n_jumps;
            path.jump_times.push_back(tau);
            path.jump_states.push_back(rho);
        }
        // Grid times equal to tau record the post-decision (cadlag) value.
        while (gi < grid.size() && grid[gi] == tau) {
            path.states.push_back(rho);
            path.counting.push_back(n_jumps);
            ++gi;
        }
    }
    emit_through(r.T + 1.0);  // drain the remaining grid
    advance(r.T);             // finish the compensator integral up to T
    return path;
}

struct MeanPath {
    std::vector<double> grid;
    std::vector<Mat2> mean;
    std::vector<Mat2> stderr_entries;   // per-entry stderr (real-valued, stored in re)
    std::vector<int> jumps_per_path;    // N_T per path
    std::vector<double> compensator_per_path;
    int n_paths = 0;
};

// Pointwise ensemble mean of solve_path over independent realizations, with
// per-entry standard errors. Realizations are sampled at mark height K+1 (the
// shared-realization convention; thinning never accepts marks above the true
// intensity, so the law is unchanged). Per-path results land in slots indexed
// by path and are reduced sequentially, so the output is bit-identical for
// any worker count.
inline MeanPath monte_carlo_mean(const FlowParams& params, const Mat2& rho0, double T,
                                 const std::vector<double>& grid, int n_paths,
                                 std::uint64_t seed, int workers = 1) {
    if (n_paths < 2) throw std::invalid_argument("monte_carlo_mean: need at least 2 paths");
    MeanPath out;
    out.grid = grid;
    out.n_paths = n_paths;
    out.jumps_per_path.resize(n_paths);
    out.compensator_per_path.resize(n_paths);

    std::vector<std::vector<Mat2>> per_path(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t i) {
        RngStream rng(seed, stream_id(StreamPurpose::realization, i));
        const auto r = sample_realization(params.K + 1.0, T, rng);
        auto path = solve_path(rho0, r, params, grid);
        per_path[i] = std::move(path.states);
        out.jumps_per_path[i] = static_cast<int>(path.jump_times.size());
        out.compensator_per_path[i] = path.compensator_T;
    });

    const std::size_t g = grid.size();
    out.mean.assign(g, Mat2::zero());
    out.stderr_entries.assign(g, Mat2::zero());
    for (std::size_t t = 0; t < g; ++t) {
        Mat2 sum = Mat2::zero();
        Mat2 sumsq = Mat2::zero();  // per-entry sums of Re^2 and Im^2, packed as a complex pair
        for (int i = 0; i < n_paths; ++i) {
            const Mat2& s = per_path[i][t];
            sum += s;
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t c = 0; c < 2; ++c)
                    sumsq(r, c) += cplx{s(r, c).real() * s(r, c).real(),
                                        s(r, c).imag() * s(r, c).imag()};
        }
        const double inv = 1.0 / n_paths;
        out.mean[t] = sum * cplx{inv, 0.0};
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 2; ++c) {
                const double vr = std::max(
                    0.0, (sumsq(r, c).real() - n_paths * out.mean[t](r, c).real() *
                                                   out.mean[t](r, c).real()) /
                             (n_paths - 1.0));
                const double vi = std::max(
                    0.0, (sumsq(r, c).imag() - n_paths * out.mean[t](r, c).imag() *
                                                   out.mean[t](r, c).imag()) /
                             (n_paths - 1.0));
                out.stderr_entries[t](r, c) = cplx{std::sqrt((vr + vi) * inv), 0.0};
            }
    }
    return out;
}

}  // namespace qjump
