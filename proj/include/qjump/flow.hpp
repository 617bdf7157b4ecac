#pragma once

// Deterministic dynamics between jumps.
//
//   lindblad:   L(rho) = -i[H,rho] - 1/2{C*C,rho} + C rho C*
//   drift_f:    f(A)   = L(A) + Tr[J(A)] A - J(A),   J(A) = C A C*
//   pure form:  dx/dt  = (-iH - 1/2 C*C + 1/2 eta) x,  eta = <x, C*C x>
//
// Between jumps the state follows drho = f(rho) dt; the master equation
// drho = L(rho) dt is the Monte-Carlo oracle. Both are integrated with
// classical RK4 at a fixed step (the fields are smooth and bounded on the
// state set, no adaptivity needed); the state is renormalized by its trace
// after every step and positivity is deliberately NOT enforced, so it stays
// a genuine test of the dynamics.

#include <array>
#include <cmath>
#include <stdexcept>

#include "qjump/matrix.hpp"

namespace qjump {

inline constexpr double flow_step_cap = 1e-3;  // RK4 step; defects <= 1e-8 per unit time

struct FlowParams {
    Mat2 H;
    Mat2 C;
    Mat2 CdC;   // C*C
    double K;   // lambda_max(C*C), the sharp intensity bound

    FlowParams(const Mat2& h, const Mat2& c) : H(h), C(c), CdC(adjoint(c) * c) {
        if (hermiticity_defect(h) > tol_state)
            throw std::invalid_argument("FlowParams: H not hermitian");
        K = std::max(0.0, eig2_hermitian(CdC).hi);
    }
};

inline Mat2 jump_map(const FlowParams& p, const Mat2& a) { return p.C * a * adjoint(p.C); }

inline double jump_intensity(const FlowParams& p, const Mat2& rho) {
    // Tr[C rho C*] = Tr[rho C*C]; real for hermitian rho.
    return trace(rho * p.CdC).real();
}

inline Mat2 lindblad(const FlowParams& p, const Mat2& rho) {
    const Mat2 comm = p.H * rho - rho * p.H;
    const Mat2 anti = p.CdC * rho + rho * p.CdC;
    return cplx{0.0, -1.0} * comm - 0.5 * anti + jump_map(p, rho);
}

// Defined for arbitrary (possibly non-hermitian) A: the Euler scheme iterates
// need it. The trace weight is kept complex; it is real on states.
inline Mat2 drift_f(const FlowParams& p, const Mat2& a) {
    const Mat2 j = jump_map(p, a);
    return lindblad(p, a) + trace(j) * a - j;
}

inline std::array<cplx, 2> pure_drift(const FlowParams& p, const std::array<cplx, 2>& x) {
    const cplx eta = std::conj(x[0]) * (p.CdC(0, 0) * x[0] + p.CdC(0, 1) * x[1]) +
                     std::conj(x[1]) * (p.CdC(1, 0) * x[0] + p.CdC(1, 1) * x[1]);
    std::array<cplx, 2> out;
    for (std::size_t i = 0; i < 2; ++i) {
        const cplx hx = p.H(i, 0) * x[0] + p.H(i, 1) * x[1];
        const cplx cx = p.CdC(i, 0) * x[0] + p.CdC(i, 1) * x[1];
        out[i] = cplx{0.0, -1.0} * hx - 0.5 * cx + 0.5 * eta * x[i];
    }
    return out;
}

struct FlowStepResult {
    Mat2 state;
    double trace_drift = 0.0;      // max |Tr - 1| seen before renormalization
    double hermiticity = 0.0;      // final hermiticity defect
    double min_eigenvalue = 0.0;   // final smallest eigenvalue
};

namespace detail {

// RK4 over dt with per-step trace renormalization. Rhs is f or L; if
// compensator is non-null it accumulates int Tr[J(rho_s)] ds through the
// same RK4 stages (quadrature order matches the integrator).
template <typename Rhs>
inline FlowStepResult rk4_flow(const FlowParams& p, Mat2 rho, double dt, Rhs&& rhs,
                               double* compensator = nullptr) {
    FlowStepResult res;
    if (dt < 0.0) throw std::invalid_argument("integrate: negative time span");
    if (dt > 0.0) {
        const int steps = static_cast<int>(std::ceil(dt / flow_step_cap - 1e-12));
        const double h = dt / steps;
        if (!(h > 0.0)) throw std::runtime_error("integrate: step-size underflow");
        for (int s = 0; s < steps; ++s) {
            const Mat2 k1 = rhs(rho);
            const Mat2 k2 = rhs(rho + (0.5 * h) * k1);
            const Mat2 k3 = rhs(rho + (0.5 * h) * k2);
            const Mat2 k4 = rhs(rho + h * k3);
            if (compensator) {
                const double i1 = jump_intensity(p, rho);
                const double i2 = jump_intensity(p, rho + (0.5 * h) * k1);
                const double i3 = jump_intensity(p, rho + (0.5 * h) * k2);
                const double i4 = jump_intensity(p, rho + h * k3);
                *compensator += (h / 6.0) * (i1 + 2.0 * i2 + 2.0 * i3 + i4);
            }
            rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            const double tr = trace(rho).real();
            res.trace_drift = std::max(res.trace_drift, std::abs(tr - 1.0));
            if (!(std::abs(tr) > tol_prob)) throw std::runtime_error("integrate: trace collapsed");
            rho *= cplx{1.0 / tr, 0.0};
        }
    }
    res.state = rho;
    res.hermiticity = hermiticity_defect(rho);
    res.min_eigenvalue = eig2_hermitian(rho).lo;
    if (!is_finite(rho)) throw std::runtime_error("integrate: non-finite state");
    return res;
}

}  // namespace detail

inline FlowStepResult integrate_flow(const Mat2& rho0, double dt, const FlowParams& p,
                                     double* compensator = nullptr) {
    return detail::rk4_flow(p, rho0, dt, [&p](const Mat2& r) { return drift_f(p, r); },
                            compensator);
}

inline FlowStepResult integrate_master(const Mat2& rho0, double dt, const FlowParams& p) {
    return detail::rk4_flow(p, rho0, dt, [&p](const Mat2& r) { return lindblad(p, r); });
}

// Pure-state flow (norm renormalized each step); used only to cross-check
// that the matrix flow preserves purity.
inline std::array<cplx, 2> integrate_pure_flow(std::array<cplx, 2> x, double dt,
                                               const FlowParams& p) {
    if (dt < 0.0) throw std::invalid_argument("integrate: negative time span");
    if (dt == 0.0) return x;
    const int steps = static_cast<int>(std::ceil(dt / flow_step_cap - 1e-12));
    const double h = dt / steps;
    auto axpy = [](std::array<cplx, 2> a, double s, const std::array<cplx, 2>& b) {
        a[0] += s * b[0];
        a[1] += s * b[1];
        return a;
    };
    for (int s = 0; s < steps; ++s) {
        const auto k1 = pure_drift(p, x);
        const auto k2 = pure_drift(p, axpy(x, 0.5 * h, k1));
        const auto k3 = pure_drift(p, axpy(x, 0.5 * h, k2));
        const auto k4 = pure_drift(p, axpy(x, h, k3));
        for (std::size_t i = 0; i < 2; ++i)
            x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        const double nrm = std::sqrt(std::norm(x[0]) + std::norm(x[1]));
        x[0] /= nrm;
        x[1] /= nrm;
    }
    return x;
}

}  // namespace qjump
