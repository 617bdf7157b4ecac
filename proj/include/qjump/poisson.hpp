#pragma once

// One realization of the Poisson random measure on [0,T] x [0,K] with
// Lebesgue intensity dt(x)dx, stored as the sorted points (tau_i, xi_i).
// This is the single randomness source every jump process in the library is
// driven by; the exact solver, the Euler scheme and the coupled chains only
// ever *query* a realization, never consume randomness themselves.
//
// Interval conventions (fixed for determinism, all boundary events have
// probability zero): rectangle queries are time closed-left open-right, like
// the slab regions of the coupled chains; curve counting is open-left
// closed-right, matching strict jump-time ordering. A height at or below
// tol_prob never accepts a point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qjump/matrix.hpp"
#include "qjump/rng.hpp"

namespace qjump {

struct PoissonRealization {
    double T = 0.0;
    double K = 0.0;
    std::vector<std::pair<double, double>> points;  // (time, mark), strictly increasing times
};

// Sharp intensity bound: Tr[C rho C*] = Tr[rho C*C] <= lambda_max(C*C).
inline double intensity_bound(const Mat2& c) {
    return std::max(0.0, eig2_hermitian(adjoint(c) * c).hi);
}

inline PoissonRealization sample_realization(double K, double T, RngStream& rng) {
    if (!(K >= 0.0) || !(T > 0.0))
        throw std::invalid_argument("sample_realization: need K >= 0 and T > 0");
    PoissonRealization r;
    r.T = T;
    r.K = K;
    if (K <= 0.0) return r;
    double t = 0.0;
    for (;;) {
        t += -std::log(rng.uniform01_open()) / K;  // Exp(K) gap, strictly positive
        if (t >= T) break;
        r.points.emplace_back(t, K * rng.uniform01());
    }
    return r;
}

// #{ i : t0 < tau_i <= t1, xi_i <= height(tau_i) }, with heights <= tol_prob
// treated as "no jump possible".
template <typename HeightFn>
inline int count_under_curve(const PoissonRealization& r, double t0, double t1, HeightFn&& height) {
    int n = 0;
    for (const auto& [tau, xi] : r.points) {
        if (tau <= t0) continue;
        if (tau > t1) break;
        const double h = height(tau);
        if (h > tol_prob && xi <= h) ++n;
    }
    return n;
}

// #{ i : t0 <= tau_i < t1, u0 <= xi_i <= u1 }. u1 may exceed K (no marks live
// there); this is plain point-set geometry with no zero-height convention.
inline int count_in_rectangle(const PoissonRealization& r, double t0, double t1, double u0,
                              double u1) {
    int n = 0;
    for (const auto& [tau, xi] : r.points) {
        if (tau < t0) continue;
        if (tau >= t1) break;
        if (xi >= u0 && xi <= u1) ++n;
    }
    return n;
}

// Closed-right slab count used by the Euler interpolant when it is evaluated
// exactly at a point time (cadlag: the point at tau == t1 is included).
inline int count_in_slab_closed(const PoissonRealization& r, double t0, double t1, double height) {
    if (height <= tol_prob) return 0;
    int n = 0;
    for (const auto& [tau, xi] : r.points) {
        if (tau < t0) continue;
        if (tau > t1) break;
        if (xi <= height) ++n;
    }
    return n;
}

// Serialization: plain text, one header line "T K count", then one
// "tau xi" line per point at full round-trip precision.
inline void serialize_realization(const PoissonRealization& r, std::ostream& os) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %zu\n", r.T, r.K, r.points.size());
    os << buf;
    for (const auto& [tau, xi] : r.points) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", tau, xi);
        os << buf;
    }
}

inline PoissonRealization parse_realization(std::istream& is) {
    PoissonRealization r;
    std::size_t n = 0;
    if (!(is >> r.T >> r.K >> n)) throw std::runtime_error("realization: bad header");
    r.points.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(is >> r.points[i].first >> r.points[i].second))
            throw std::runtime_error("realization: truncated point list");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [tau, xi] = r.points[i];
        if (!(tau > 0.0) || !(tau < r.T) || (i > 0 && !(tau > r.points[i - 1].first)))
            throw std::runtime_error("realization: times not strictly increasing in (0,T)");
        if (!(xi >= 0.0) || !(xi <= r.K)) throw std::runtime_error("realization: mark out of range");
    }
    return r;
}

inline std::string serialize_realization(const PoissonRealization& r) {
    std::ostringstream os;
    serialize_realization(r, os);
    return os.str();
}

inline PoissonRealization parse_realization(const std::string& text) {
    std::istringstream is(text);
    return parse_realization(is);
}

// FNV-1a over the exact bit patterns; used to audit that coupled processes
// really consumed the same realization.
inline std::uint64_t realization_hash(const PoissonRealization& r) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto eat = [&h](double v) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        __builtin_memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xFFu;
            h *= 0x100000001B3ull;
        }
    };
    eat(r.T);
    eat(r.K);
    for (const auto& [tau, xi] : r.points) {
        eat(tau);
        eat(xi);
    }
    return h;
}

}  // namespace qjump
