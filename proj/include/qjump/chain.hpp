#pragma once

// The indirect-measurement Markov chain. One step: couple to a fresh ancilla,
// apply the block unitary, measure the ancilla observable, reduce.
//
// The non-normalized transitions come from the partial trace
//   M_i(rho) = E0[ (I(x)P_i) U (rho(x)beta) U* (I(x)P_i) ]
//            = sum_{k,l} P_i[l,k] . L_k0 rho L_l0*        (beta = |O><O|),
// so only the first block column enters. For the diagonal observable the
// cross terms vanish: M0 = L00 rho L00*, M1 = L10 rho L10*.
//
// Branch probabilities are (1-q, q) with q = Re Tr[M1(rho)]: the detection
// probability is the click-branch trace and the no-click probability is its
// complement, so p + q = 1 holds exactly. For exact unitary blocks
// Tr M0 + Tr M1 = 1 to machine precision, so p agrees with Tr M0 anyway; for
// first-order blocks (trace preserving only to O(1/n^2)) the complement
// convention makes q = Tr[J(rho)]/n exact, which is the quantity the coupled
// construction's rectangle heights are built from.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qjump/matrix.hpp"
#include "qjump/model.hpp"
#include "qjump/rng.hpp"

namespace qjump {

class TransitionMaps {
  public:
    TransitionMaps(const UnitaryBlocks& blocks, const ObservableSpec& obs, const Mat2& beta)
        : L00_(blocks.L00), L10_(blocks.L10), p0_(obs.P0), p1_(obs.P1) {
        // The chain is built around a rank-one ancilla state on the first
        // basis vector; anything else is out of scope and rejected.
        if (frobenius_norm(beta - diag2(1.0, 0.0)) > tol_state)
            throw std::invalid_argument("TransitionMaps: beta must be the ground projector");
        obs.validate();
    }

    struct Pair {
        Mat2 M0;
        Mat2 M1;
    };

    Pair apply(const Mat2& rho) const {
        const Mat2 l00d = adjoint(L00_);
        const Mat2 l10d = adjoint(L10_);
        const Mat2 a00 = L00_ * rho * l00d;  // L_k0 rho L_l0* for (k,l)
        const Mat2 a01 = L00_ * rho * l10d;
        const Mat2 a10 = L10_ * rho * l00d;
        const Mat2 a11 = L10_ * rho * l10d;
        auto combine = [&](const Mat2& p) {
            return p(0, 0) * a00 + p(1, 0) * a01 + p(0, 1) * a10 + p(1, 1) * a11;
        };
        return {combine(p0_), combine(p1_)};
    }

  private:
    Mat2 L00_, L10_;
    Mat2 p0_, p1_;
};

struct ChainStepResult {
    Mat2 state;
    int outcome = 0;
    double p = 1.0;  // no-detection probability
    double q = 0.0;  // detection probability, 1 - p by construction
};

inline ChainStepResult chain_step(const Mat2& rho, const TransitionMaps& maps, RngStream& rng) {
    const auto m = maps.apply(rho);
    const double tr0 = trace(m.M0).real();
    const double tr1 = trace(m.M1).real();
    if (tr0 < tol_prob && tr1 < tol_prob)
        throw std::runtime_error("chain_step: both branches have vanishing trace");
    ChainStepResult res;
    res.q = std::min(std::max(tr1, 0.0), 1.0);
    res.p = 1.0 - res.q;
    // Exactly one uniform per step, even on forced branches, so streams stay
    // aligned across models and modes.
    const double u = rng.uniform01();
    if (res.q <= tol_prob)
        res.outcome = 0;
    else if (res.p <= tol_prob)
        res.outcome = 1;
    else
        res.outcome = (u < res.q) ? 1 : 0;
    const Mat2& branch = res.outcome ? m.M1 : m.M0;
    const double tr = res.outcome ? tr1 : tr0;
    if (tr < tol_prob)
        throw std::runtime_error("chain_step: selected branch has vanishing trace");
    res.state = branch * cplx{1.0 / tr, 0.0};
    // Renormalize once more so trace drift can never accumulate over long chains.
    res.state *= cplx{1.0 / trace(res.state).real(), 0.0};
    return res;
}

// Normalized measurement noise of one step; defined only for 0 < p,q < 1.
inline double normalized_noise(double p, double q, int outcome) {
    if (!(p > 0.0) || !(p < 1.0) || !(q > 0.0) || !(q < 1.0))
        throw std::domain_error("normalized_noise: p, q must lie in (0,1)");
    return outcome ? std::sqrt(p / q) : -std::sqrt(q / p);
}

struct ChainHistory {
    std::vector<Mat2> states;     // rho_0 .. rho_[nT]
    std::vector<int> outcomes;    // nu_1 .. nu_[nT]
    std::vector<double> p;        // per step
    std::vector<double> q;
    std::vector<double> noise;    // X_k; NaN where p or q is degenerate
};

inline ChainHistory simulate_chain(const ModelSpec& spec, int n, double T, const Mat2& rho0,
                                   RngStream& rng, BlockMode mode) {
    if (!(T > 0.0)) throw std::invalid_argument("simulate_chain: T > 0 required");
    spec.validate();
    const auto blocks = build_unitary(spec, n, mode);
    const TransitionMaps maps(blocks, spec.observable, spec.beta);
    const int steps = static_cast<int>(std::floor(n * T + 1e-9));
    ChainHistory hist;
    hist.states.reserve(steps + 1);
    hist.states.push_back(rho0);
    Mat2 rho = rho0;
    for (int k = 0; k < steps; ++k) {
        const auto r = chain_step(rho, maps, rng);
        rho = r.state;
        hist.states.push_back(rho);
        hist.outcomes.push_back(r.outcome);
        hist.p.push_back(r.p);
        hist.q.push_back(r.q);
        const bool degenerate = r.p <= tol_prob || r.q <= tol_prob;
        hist.noise.push_back(degenerate ? std::numeric_limits<double>::quiet_NaN()
                                        : normalized_noise(r.p, r.q, r.outcome));
    }
    return hist;
}

}  // namespace qjump
