#pragma once

// Dense complex 2x2 / 4x4 matrices and the quantum-state primitives the
// trajectory engines are built on. Everything is value-semantic,
// allocation-free and safe to share across threads.
//
// Composite-space convention: operators on system(x)ancilla use the ordered
// product basis  O(x)O, X(x)O, O(x)X, X(x)X  (system index varies fastest),
// so the four 2x2 quadrants of a 4x4 matrix are exactly the blocks L00, L01,
// L10, L11 indexed by the ancilla component.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace qjump {

using cplx = std::complex<double>;

inline constexpr double tol_state = 1e-9;   // state-invariant budget after analytic ops
inline constexpr double tol_prob = 1e-14;   // below this a probability/intensity is zero

template <std::size_t N>
class CMat {
  public:
    CMat() : e_{} {}

    static CMat zero() { return CMat{}; }

    static CMat identity() {
        CMat m;
        for (std::size_t i = 0; i < N; ++i) m(i, i) = 1.0;
        return m;
    }

    cplx& operator()(std::size_t r, std::size_t c) { return e_[r * N + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return e_[r * N + c]; }

    CMat& operator+=(const CMat& o) {
        for (std::size_t i = 0; i < N * N; ++i) e_[i] += o.e_[i];
        return *this;
    }
    CMat& operator-=(const CMat& o) {
        for (std::size_t i = 0; i < N * N; ++i) e_[i] -= o.e_[i];
        return *this;
    }
    CMat& operator*=(cplx s) {
        for (std::size_t i = 0; i < N * N; ++i) e_[i] *= s;
        return *this;
    }

    friend CMat operator+(CMat a, const CMat& b) { return a += b; }
    friend CMat operator-(CMat a, const CMat& b) { return a -= b; }
    friend CMat operator*(cplx s, CMat a) { return a *= s; }
    friend CMat operator*(CMat a, cplx s) { return a *= s; }

    friend CMat operator*(const CMat& a, const CMat& b) {
        CMat r;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < N; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                for (std::size_t j = 0; j < N; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    bool operator==(const CMat& o) const { return e_ == o.e_; }

  private:
    std::array<cplx, N * N> e_;
};

using Mat2 = CMat<2>;
using Mat4 = CMat<4>;

template <std::size_t N>
inline CMat<N> adjoint(const CMat<N>& m) {
    CMat<N> r;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) r(i, j) = std::conj(m(j, i));
    return r;
}

template <std::size_t N>
inline cplx trace(const CMat<N>& m) {
    cplx t{};
    for (std::size_t i = 0; i < N; ++i) t += m(i, i);
    return t;
}

template <std::size_t N>
inline double frobenius_norm(const CMat<N>& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) s += std::norm(m(i, j));
    return std::sqrt(s);
}

template <std::size_t N>
inline bool is_finite(const CMat<N>& m) {
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
    return true;
}

template <std::size_t N>
inline double hermiticity_defect(const CMat<N>& m) {
    return frobenius_norm(m - adjoint(m));
}

// Kronecker product sys(x)anc in the fixed composite ordering: the composite
// row index is i + 2*j with i the system index and j the ancilla index, so
// entry ((i,j),(i',j')) = sys(i,i') * anc(j,j').
inline Mat4 kron_sys_anc(const Mat2& sys, const Mat2& anc) {
    Mat4 r;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t ip = 0; ip < 2; ++ip)
                for (std::size_t jp = 0; jp < 2; ++jp)
                    r(i + 2 * j, ip + 2 * jp) = sys(i, ip) * anc(j, jp);
    return r;
}

// Partial trace over the ancilla: the unique 2x2 E0[m] with
// Tr[E0[m] X] = Tr[m (X(x)I)] for every 2x2 X.
inline Mat2 partial_trace_second(const Mat4& m) {
    Mat2 r;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t ip = 0; ip < 2; ++ip)
            r(i, ip) = m(i, ip) + m(i + 2, ip + 2);
    return r;
}

// 2x2 quadrant of a 4x4 matrix, indexed by ancilla row/column. With the fixed
// ordering these are literally the top-left (00), top-right (01),
// bottom-left (10), bottom-right (11) quadrants.
inline Mat2 block(const Mat4& m, std::size_t j, std::size_t jp) {
    Mat2 r;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t ip = 0; ip < 2; ++ip) r(i, ip) = m(i + 2 * j, ip + 2 * jp);
    return r;
}

inline Mat4 assemble_blocks(const Mat2& b00, const Mat2& b01, const Mat2& b10, const Mat2& b11) {
    Mat4 r;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t ip = 0; ip < 2; ++ip) {
            r(i, ip) = b00(i, ip);
            r(i, ip + 2) = b01(i, ip);
            r(i + 2, ip) = b10(i, ip);
            r(i + 2, ip + 2) = b11(i, ip);
        }
    return r;
}

// Eigenvalues of a hermitian 2x2 matrix, closed form from trace/determinant.
// Input is hermitized first so near-hermitian floating products are accepted.
struct Eig2 {
    double lo;
    double hi;
};

inline Eig2 eig2_hermitian(const Mat2& m) {
    const double a = 0.5 * (m(0, 0).real() + std::conj(m(0, 0)).real());
    const double d = 0.5 * (m(1, 1).real() + std::conj(m(1, 1)).real());
    const cplx b = 0.5 * (m(0, 1) + std::conj(m(1, 0)));
    const double mean = 0.5 * (a + d);
    const double disc = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(b));
    return {mean - disc, mean + disc};
}

namespace detail {

// Solve A X = B by Gaussian elimination with partial pivoting. N is 2 or 4;
// no blocking or pivot-growth heroics needed at this size.
template <std::size_t N>
inline CMat<N> solve(CMat<N> a, CMat<N> b) {
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < N; ++r) {
            const double v = std::abs(a(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0.0) throw std::runtime_error("singular matrix in solve");
        if (piv != col) {
            for (std::size_t j = 0; j < N; ++j) {
                std::swap(a(col, j), a(piv, j));
                std::swap(b(col, j), b(piv, j));
            }
        }
        const cplx inv = 1.0 / a(col, col);
        for (std::size_t r = 0; r < N; ++r) {
            if (r == col) continue;
            const cplx f = a(r, col) * inv;
            if (f == cplx{}) continue;
            for (std::size_t j = 0; j < N; ++j) {
                a(r, j) -= f * a(col, j);
                b(r, j) -= f * b(col, j);
            }
        }
    }
    CMat<N> x;
    for (std::size_t r = 0; r < N; ++r) {
        const cplx inv = 1.0 / a(r, r);
        for (std::size_t j = 0; j < N; ++j) x(r, j) = b(r, j) * inv;
    }
    return x;
}

template <std::size_t N>
inline double one_norm(const CMat<N>& m) {
    double best = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < N; ++i) c += std::abs(m(i, j));
        best = std::max(best, c);
    }
    return best;
}

// exp(A) by scaling-and-squaring with the degree-13 Pade approximant
// (Higham 2005). For our 2x2/4x4 generators this is accurate to ~1e-15
// relative, comfortably inside the 1e-12 contract.
template <std::size_t N>
inline CMat<N> expm(CMat<N> a) {
    static const double b[14] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
    const double theta13 = 5.371920351148152;
    const double nrm = one_norm(a);
    int squarings = 0;
    if (nrm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
        a *= cplx{std::ldexp(1.0, -squarings), 0.0};
    }
    const CMat<N> ident = CMat<N>::identity();
    const CMat<N> a2 = a * a;
    const CMat<N> a4 = a2 * a2;
    const CMat<N> a6 = a2 * a4;
    CMat<N> u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 +
                b[1] * ident;
    u = a * u;
    const CMat<N> v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                      b[2] * a2 + b[0] * ident;
    CMat<N> r = solve(v - u, v + u);
    for (int s = 0; s < squarings; ++s) r = r * r;
    return r;
}

}  // namespace detail

// exp(i * scale * m). The factor i is part of the contract: hermitian m with
// real scale yields a unitary.
template <std::size_t N>
inline CMat<N> mat_exp(const CMat<N>& m, double scale) {
    if (!is_finite(m) || !std::isfinite(scale))
        throw std::invalid_argument("mat_exp: non-finite input");
    return detail::expm(cplx{0.0, scale} * m);
}

struct ValidationReport {
    double hermiticity_defect;
    double trace_defect;
    double min_eigenvalue;
    bool pass;
};

inline ValidationReport validate_state(const Mat2& m, double tol) {
    ValidationReport r{};
    r.hermiticity_defect = hermiticity_defect(m);
    r.trace_defect = std::abs(trace(m) - cplx{1.0, 0.0});
    r.min_eigenvalue = eig2_hermitian(m).lo;
    r.pass = is_finite(m) && r.hermiticity_defect <= tol && r.trace_defect <= tol &&
             r.min_eigenvalue >= -tol;
    return r;
}

// Thin validated wrapper for a density matrix. Hot loops work on raw Mat2 and
// wrap at API boundaries.
class DensityState {
  public:
    explicit DensityState(const Mat2& m, double tol = tol_state) : m_(m) {
        const auto rep = validate_state(m, tol);
        if (!rep.pass)
            throw std::invalid_argument(
                "DensityState: invariant violation (hermiticity " +
                std::to_string(rep.hermiticity_defect) + ", trace defect " +
                std::to_string(rep.trace_defect) + ", min eig " +
                std::to_string(rep.min_eigenvalue) + ")");
    }
    const Mat2& m() const { return m_; }

  private:
    Mat2 m_;
};

class PureState {
  public:
    PureState(cplx a, cplx b, double tol = tol_state) : v_{a, b} {
        const double n = std::sqrt(std::norm(a) + std::norm(b));
        if (!(std::abs(n - 1.0) <= tol))
            throw std::invalid_argument("PureState: vector norm " + std::to_string(n));
    }
    cplx operator[](std::size_t i) const { return v_[i]; }

  private:
    std::array<cplx, 2> v_;
};

inline Mat2 projector_from_vector(const PureState& x) {
    Mat2 p;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) p(i, j) = x[i] * std::conj(x[j]);
    return p;
}

// Convenience constructors used all over the tests and the CLI defaults.
inline Mat2 diag2(cplx a, cplx b) {
    Mat2 m;
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

inline Mat2 mat2(cplx a00, cplx a01, cplx a10, cplx a11) {
    Mat2 m;
    m(0, 0) = a00;
    m(0, 1) = a01;
    m(1, 0) = a10;
    m(1, 1) = a11;
    return m;
}

}  // namespace qjump
