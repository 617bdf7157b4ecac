#pragma once

// Frozen-coefficient Euler scheme for the jump-Belavkin equation on the 1/n
// grid, driven by the same Poisson realization as the exact solver:
//
//   theta_{k+1} = theta_k + (1/n) f(theta_k)
//                 + q(theta_k) . #{ points in [k/n,(k+1)/n) x [0, Re Tr J(theta_k)] }
//
// The jump displacement q must be Lipschitz through the indicator's edge.
// When C is invertible, J(rho)/Tr J(rho) - rho is already smooth on states
// (Tr J >= lambda_min(C*C) > 0) and a denominator guard realizes its
// extension off the state set. When C is singular the normalized jump target
// is the constant E00 after conjugating the whole problem by a unitary V that
// zeroes the second row of C; we solve in that frame and conjugate back for
// reporting (gamma = V mu V*, so mu = V* gamma V).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qjump/flow.hpp"
#include "qjump/matrix.hpp"
#include "qjump/parallel.hpp"
#include "qjump/poisson.hpp"
#include "qjump/rng.hpp"
#include "qjump/trajectory.hpp"

namespace qjump {

struct JumpFunctionSpec {
    enum class Mode { invertible, transformed };
    Mode mode = Mode::invertible;
    Mat2 V = Mat2::identity();   // identity in invertible mode
    Mat2 C_frame;                // V C V*, the coupling the scheme works with
    double epsilon_guard = 1e-12;

    Mat2 q(const Mat2& theta) const {
        if (mode == Mode::transformed) return diag2(1.0, 0.0) - theta;
        const Mat2 j = C_frame * theta * adjoint(C_frame);
        const double tr = std::max(trace(j).real(), epsilon_guard);
        return j * cplx{1.0 / tr, 0.0} - theta;
    }
};

inline JumpFunctionSpec build_jump_function(const Mat2& c) {
    JumpFunctionSpec jf;
    const Mat2 cdc = adjoint(c) * c;
    const double smin = std::sqrt(std::max(0.0, eig2_hermitian(cdc).lo));
    if (smin > 1e-10) {
        jf.mode = JumpFunctionSpec::Mode::invertible;
        jf.V = Mat2::identity();
        jf.C_frame = c;
        return jf;
    }
    // Singular C: pick a unit kernel vector k of C* from its better-scaled
    // row and make it the second row's conjugate, so row 2 of V C V* is
    // k* C V* = (C* k)* V* = 0.
    const Mat2 cd = adjoint(c);
    const double r0 = std::sqrt(std::norm(cd(0, 0)) + std::norm(cd(0, 1)));
    const double r1 = std::sqrt(std::norm(cd(1, 0)) + std::norm(cd(1, 1)));
    cplx k0, k1;
    if (r0 < 1e-300 && r1 < 1e-300) {
        k0 = 0.0;  // C ~ 0: any unitary works, keep the identity frame
        k1 = 1.0;
    } else if (r0 >= r1) {
        k0 = cd(0, 1);
        k1 = -cd(0, 0);
    } else {
        k0 = cd(1, 1);
        k1 = -cd(1, 0);
    }
    const double nrm = std::sqrt(std::norm(k0) + std::norm(k1));
    k0 /= nrm;
    k1 /= nrm;
    jf.mode = JumpFunctionSpec::Mode::transformed;
    jf.V = mat2(k1, -k0, std::conj(k0), std::conj(k1));
    jf.C_frame = jf.V * c * adjoint(jf.V);
    const double row2 = std::sqrt(std::norm(jf.C_frame(1, 0)) + std::norm(jf.C_frame(1, 1)));
    if (row2 > 1e-10)
        throw std::runtime_error("build_jump_function: V failed the zero-second-row check");
    return jf;
}

// One frozen-coefficient step in the working frame. The Re(.) on the frozen
// intensity is deliberate (iterates need not be hermitian); negative values
// give an empty rectangle.
inline Mat2 euler_step(const Mat2& theta, const PoissonRealization& r, int k, int n,
                       const JumpFunctionSpec& jf, const FlowParams& params_frame) {
    if (!is_finite(theta)) throw std::invalid_argument("euler_step: non-finite iterate");
    const double h = 1.0 / static_cast<double>(n);
    const double height = std::max(0.0, trace(jump_map(params_frame, theta)).real());
    int cnt = 0;
    if (height > tol_prob)
        cnt = count_in_rectangle(r, k * h, (k + 1) * h, 0.0, height);
    Mat2 out = theta + h * drift_f(params_frame, theta);
    if (cnt > 0) out += static_cast<double>(cnt) * jf.q(theta);
    return out;
}

struct EulerPath {
    int n = 1;
    int steps = 0;
    double T = 0.0;
    JumpFunctionSpec jf;
    std::vector<Mat2> theta;  // working-frame iterates, size steps+1

    // Working-frame flow parameters are reconstructed by callers when needed;
    // the path stores what interpolation requires.
    Mat2 H_frame;
    Mat2 C_frame;

    Mat2 report(int k) const {  // back to the original frame
        return adjoint(jf.V) * theta[static_cast<std::size_t>(k)] * jf.V;
    }

    // Within-cell interpolant at time t in [0, steps/n]: frozen drift plus
    // the clicks of the driving realization that have arrived by t, applied
    // with the cell-start coefficients; exact at grid points, cadlag at
    // point times.
    Mat2 interp_report(const PoissonRealization& r, double t) const {
        const double h = 1.0 / static_cast<double>(n);
        int k = static_cast<int>(std::floor(t * n));
        if (k >= steps) k = steps - 1;
        if (k < 0) k = 0;
        const double tk = k * h;
        const double tk1 = (k + 1) * h;
        if (t >= tk1) return report(k + 1);
        if (t <= tk) return report(k);
        const FlowParams p(H_frame, C_frame);
        const Mat2& th = theta[static_cast<std::size_t>(k)];
        const double height = std::max(0.0, trace(jump_map(p, th)).real());
        const int cnt = count_in_slab_closed(r, tk, t, height);
        Mat2 v = th + (t - tk) * drift_f(p, th);
        if (cnt > 0) v += static_cast<double>(cnt) * jf.q(th);
        return adjoint(jf.V) * v * jf.V;
    }
};

inline EulerPath euler_path(const Mat2& rho0, const PoissonRealization& r, int n, double T,
                            const JumpFunctionSpec& jf, const FlowParams& params) {
    if (!(T > 0.0) || n < 1) throw std::invalid_argument("euler_path: need n >= 1, T > 0");
    EulerPath path;
    path.n = n;
    path.T = T;
    path.steps = static_cast<int>(std::floor(n * T + 1e-9));
    path.jf = jf;
    path.H_frame = jf.V * params.H * adjoint(jf.V);
    path.C_frame = jf.V * params.C * adjoint(jf.V);
    const FlowParams pf(path.H_frame, path.C_frame);
    path.theta.reserve(path.steps + 1);
    path.theta.push_back(jf.V * rho0 * adjoint(jf.V));
    for (int k = 0; k < path.steps; ++k)
        path.theta.push_back(euler_step(path.theta.back(), r, k, n, jf, pf));
    return path;
}

struct SupErrorEstimate {
    double mean = 0.0;
    double stderr_mean = 0.0;
    std::vector<double> per_path;
};

// E[ sup_t || theta~_t - mu_t || ] over shared realizations, the sup taken on
// the k/n grid union the exact path's jump times.
inline SupErrorEstimate euler_sup_error(const Mat2& rho0, const FlowParams& params, int n,
                                        double T, int n_paths, std::uint64_t seed,
                                        int workers = 1) {
    if (n_paths < 2) throw std::invalid_argument("euler_sup_error: need at least 2 paths");
    const JumpFunctionSpec jf = build_jump_function(params.C);
    const int steps = static_cast<int>(std::floor(n * T + 1e-9));
    std::vector<double> grid(steps + 1);
    for (int k = 0; k <= steps; ++k) grid[k] = static_cast<double>(k) / n;

    SupErrorEstimate est;
    est.per_path.resize(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t i) {
        RngStream rng(seed, stream_id(StreamPurpose::realization, i));
        const auto r = sample_realization(params.K + 1.0, T, rng);
        const auto exact = solve_path(rho0, r, params, grid);
        const auto eul = euler_path(rho0, r, n, T, jf, params);
        double sup = 0.0;
        for (int k = 0; k <= steps; ++k)
            sup = std::max(sup, frobenius_norm(eul.report(k) - exact.states[k]));
        for (std::size_t j = 0; j < exact.jump_times.size(); ++j)
            sup = std::max(sup, frobenius_norm(eul.interp_report(r, exact.jump_times[j]) -
                                               exact.jump_states[j]));
        est.per_path[i] = sup;
    });
    double s = 0.0, s2 = 0.0;
    for (double v : est.per_path) {
        s += v;
        s2 += v * v;
    }
    est.mean = s / n_paths;
    const double var = std::max(0.0, (s2 - n_paths * est.mean * est.mean) / (n_paths - 1.0));
    est.stderr_mean = std::sqrt(var / n_paths);
    return est;
}

}  // namespace qjump
