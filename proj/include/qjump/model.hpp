#pragma once

// Physical model description and the repeated-interaction unitary blocks.
//
// One interaction step of length h = 1/n couples the system to a fresh
// two-level ancilla prepared in the ground projector beta = |O><O|; the block
// column (L00, L10) of the interaction unitary is all the measurement
// dynamics ever reads. Two block constructions are provided:
//
//   exact:      U(n) = exp( -i(1/n) H(x)I + (1/sqrt n)(C(x)E10 - C*(x)E01) ),
//               the interaction-picture unitary with the 1/sqrt(h)-renormalized
//               coupling. The generator is anti-hermitian, so U is unitary to
//               machine precision, and its blocks obey the asymptotics below
//               with O(n^-3/2) remainders and no stray phases.
//   asymptotic: L00 = I + (1/n)(-iH - 1/2 C*C), L10 = (1/sqrt n) C, remainders
//               set to zero. L01 = -(1/sqrt n) C*, L11 = I + (1/n)(-iH - 1/2 CC*)
//               are filled for completeness but are non-authoritative: beta is
//               rank one, so the dynamics only touch L00/L10.

#include <cmath>
#include <stdexcept>
#include <string>

#include "qjump/matrix.hpp"

namespace qjump {

struct ObservableSpec {
    Mat2 P0;
    Mat2 P1;
    double lambda0 = 0.0;  // informational only; the dynamics never read the eigenvalues
    double lambda1 = 1.0;

    void validate() const {
        const Mat2 ident = Mat2::identity();
        for (const Mat2* p : {&P0, &P1}) {
            if (hermiticity_defect(*p) > tol_state)
                throw std::invalid_argument("ObservableSpec: projector not hermitian");
            if (frobenius_norm((*p) * (*p) - *p) > tol_state)
                throw std::invalid_argument("ObservableSpec: projector not idempotent");
        }
        if (frobenius_norm(P0 + P1 - ident) > tol_state)
            throw std::invalid_argument("ObservableSpec: P0 + P1 != I");
        if (frobenius_norm(P0 * P1) > tol_state)
            throw std::invalid_argument("ObservableSpec: P0 P1 != 0");
    }

    bool is_diagonal() const {
        return frobenius_norm(P0 - diag2(1.0, 0.0)) <= tol_state;
    }

    static ObservableSpec diagonal() {
        ObservableSpec o;
        o.P0 = diag2(1.0, 0.0);
        o.P1 = diag2(0.0, 1.0);
        return o;
    }
};

struct ModelSpec {
    Mat2 H;
    Mat2 C;
    ObservableSpec observable;
    Mat2 beta;  // ancilla reference state, the ground projector

    void validate() const {
        if (hermiticity_defect(H) > tol_state)
            throw std::invalid_argument("ModelSpec: H not hermitian");
        if (!validate_state(beta, tol_state).pass)
            throw std::invalid_argument("ModelSpec: beta is not a state");
        observable.validate();
    }

    // The canonical benchmark: H = diag(1,-1)/2, lowering coupling, diagonal
    // observable, ancilla in the ground projector.
    static ModelSpec amplitude_damping() {
        ModelSpec s;
        s.H = diag2(0.5, -0.5);
        s.C = mat2(0.0, 1.0, 0.0, 0.0);
        s.observable = ObservableSpec::diagonal();
        s.beta = diag2(1.0, 0.0);
        return s;
    }
};

enum class BlockMode { exact, asymptotic };

struct UnitaryBlocks {
    Mat2 L00, L01, L10, L11;
    int n = 1;
    BlockMode mode = BlockMode::exact;

    Mat4 assemble() const { return assemble_blocks(L00, L01, L10, L11); }

    double unitarity_defect() const {
        const Mat4 u = assemble();
        return frobenius_norm(adjoint(u) * u - Mat4::identity());
    }
};

// The total Hamiltonian display: H(x)I + I(x)diag(1,0) + coupling/sqrt(n).
inline Mat4 build_total_hamiltonian(const ModelSpec& spec, int n) {
    if (n < 1) throw std::invalid_argument("build_total_hamiltonian: n >= 1 required");
    const Mat2 ident = Mat2::identity();
    const Mat2 e10 = mat2(0.0, 0.0, 1.0, 0.0);
    const Mat2 e01 = mat2(0.0, 1.0, 0.0, 0.0);
    const double g = 1.0 / std::sqrt(static_cast<double>(n));
    return kron_sys_anc(spec.H, ident) + kron_sys_anc(ident, diag2(1.0, 0.0)) +
           g * (kron_sys_anc(spec.C, e10) + kron_sys_anc(adjoint(spec.C), e01));
}

inline UnitaryBlocks build_unitary_exact(const ModelSpec& spec, int n) {
    if (n < 1) throw std::invalid_argument("build_unitary_exact: n >= 1 required");
    const Mat2 e10 = mat2(0.0, 0.0, 1.0, 0.0);
    const Mat2 e01 = mat2(0.0, 1.0, 0.0, 0.0);
    const double h = 1.0 / static_cast<double>(n);
    // Hermitian generator A with U = exp(i h A): the system Hamiltonian enters
    // with the physical -iH/n and the coupling is renormalized by sqrt(n) so
    // L10 = sqrt(h) C + O(h^{3/2}) comes out with a real positive coefficient.
    const Mat4 a = cplx{-1.0, 0.0} * kron_sys_anc(spec.H, Mat2::identity()) +
                   (1.0 / std::sqrt(h)) * (cplx{0.0, 1.0} * kron_sys_anc(adjoint(spec.C), e01) +
                                           cplx{0.0, -1.0} * kron_sys_anc(spec.C, e10));
    const Mat4 u = mat_exp(a, h);
    UnitaryBlocks b;
    b.L00 = block(u, 0, 0);
    b.L01 = block(u, 0, 1);
    b.L10 = block(u, 1, 0);
    b.L11 = block(u, 1, 1);
    b.n = n;
    b.mode = BlockMode::exact;
    return b;
}

inline UnitaryBlocks build_unitary_asymptotic(const ModelSpec& spec, int n) {
    if (n < 1) throw std::invalid_argument("build_unitary_asymptotic: n >= 1 required");
    const double h = 1.0 / static_cast<double>(n);
    const double sh = std::sqrt(h);
    const Mat2 ident = Mat2::identity();
    const Mat2 cdc = adjoint(spec.C) * spec.C;
    const Mat2 ccd = spec.C * adjoint(spec.C);
    const Mat2 d = cplx{0.0, -1.0} * spec.H - 0.5 * cdc;
    UnitaryBlocks b;
    b.L00 = ident + h * d;
    b.L10 = sh * spec.C;
    b.L01 = cplx{-sh, 0.0} * adjoint(spec.C);
    b.L11 = ident + h * (cplx{0.0, -1.0} * spec.H - 0.5 * ccd);
    b.n = n;
    b.mode = BlockMode::asymptotic;
    return b;
}

inline UnitaryBlocks build_unitary(const ModelSpec& spec, int n, BlockMode mode) {
    return mode == BlockMode::exact ? build_unitary_exact(spec, n)
                                    : build_unitary_asymptotic(spec, n);
}

}  // namespace qjump
