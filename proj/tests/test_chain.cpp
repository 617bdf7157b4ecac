#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>

#include "qjump/chain.hpp"
#include "qjump/matrix.hpp"
#include "qjump/model.hpp"
#include "qjump/rng.hpp"

using namespace qjump;

namespace {
const Mat2 kExcited = diag2(0.0, 1.0);
const Mat2 kGround = diag2(1.0, 0.0);
constexpr double kExpMinusOne = 0.36787944117144233;
}  // namespace

TEST_CASE("no-detection probability from the excited state, one step", "[chain]") {
    // With truncated blocks at n = 100 the click branch carries weight
    // |1/sqrt(n)|^2 = 1/n exactly from the excited state, so p = 1 - 1/n.
    const auto spec = ModelSpec::amplitude_damping();
    const auto maps = TransitionMaps(build_unitary(spec, 100, BlockMode::asymptotic),
                                     spec.observable, spec.beta);
    RngStream rng(1, stream_id(StreamPurpose::chain, 0));
    const auto r = chain_step(kExcited, maps, rng);
    CHECK(std::abs(r.q - 0.01) < 1e-15);
    CHECK(std::abs(r.p - 0.99) < 1e-15);
    CHECK(r.p + r.q == 1.0);
}

TEST_CASE("p + q = 1 holds exactly along whole chains", "[chain]") {
    const auto spec = ModelSpec::amplitude_damping();
    for (BlockMode mode : {BlockMode::exact, BlockMode::asymptotic}) {
        RngStream rng(11, stream_id(StreamPurpose::chain, 1));
        const auto hist = simulate_chain(spec, 64, 1.0, kExcited, rng, mode);
        REQUIRE(hist.p.size() == 64);
        for (std::size_t k = 0; k < hist.p.size(); ++k) {
            CHECK(hist.p[k] + hist.q[k] == 1.0);
            CHECK(hist.p[k] >= 0.0);
            CHECK(hist.p[k] <= 1.0);
        }
        CHECK(hist.states.size() == 65);
        CHECK(hist.outcomes.size() == 64);
    }
}

TEST_CASE("exact blocks make the two branch weights sum to one", "[chain]") {
    const auto spec = ModelSpec::amplitude_damping();
    const auto maps =
        TransitionMaps(build_unitary(spec, 37, BlockMode::exact), spec.observable, spec.beta);
    const Mat2 probe = mat2(0.5, cplx{0.25, 0.1}, cplx{0.25, -0.1}, 0.5);
    for (const Mat2& rho : {kExcited, kGround, diag2(0.3, 0.7), probe}) {
        const auto m = maps.apply(rho);
        CHECK(std::abs(trace(m.M0).real() + trace(m.M1).real() - 1.0) < 1e-12);
        CHECK(std::abs(trace(m.M0).imag()) < 1e-14);
    }
}

TEST_CASE("every step consumes exactly one uniform, forced branches included", "[chain]") {
    const auto spec = ModelSpec::amplitude_damping();
    RngStream a(7, stream_id(StreamPurpose::chain, 3));
    RngStream b(7, stream_id(StreamPurpose::chain, 3));
    // Exact blocks absorb into the ground state after the detection click, so
    // the tail of this chain runs on forced branches.
    const auto hist = simulate_chain(spec, 50, 2.0, kExcited, a, BlockMode::exact);
    for (std::size_t k = 0; k < hist.outcomes.size(); ++k) (void)b.uniform01();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("detection count matches the absorption law", "[chain]") {
    const auto spec = ModelSpec::amplitude_damping();
    const int n = 100;
    const int paths = 3000;
    int detected = 0;
    for (int i = 0; i < paths; ++i) {
        RngStream rng(5, stream_id(StreamPurpose::chain, static_cast<std::uint64_t>(i)));
        const auto hist = simulate_chain(spec, n, 1.0, kExcited, rng, BlockMode::exact);
        int clicks = 0;
        for (int nu : hist.outcomes) clicks += nu;
        // the lowering coupling admits at most one click per path
        REQUIRE(clicks <= 1);
        detected += clicks;
    }
    const double frac = static_cast<double>(detected) / paths;
    const double want = 1.0 - kExpMinusOne;
    const double se = std::sqrt(want * (1.0 - want) / paths);
    // 5 sigma plus an O(1/n) discretization allowance
    CHECK(std::abs(frac - want) < 5.0 * se + 2.0 / n);
}

TEST_CASE("ground state is dark: clamped p, outcome 0, degenerate noise", "[chain]") {
    const auto spec = ModelSpec::amplitude_damping();
    RngStream rng(3, stream_id(StreamPurpose::chain, 9));
    // Truncated blocks overshoot the survivor weight by h^2/4 at the ground
    // state; the clamp pins p to 1 and the outcome to 0.
    const auto hist = simulate_chain(spec, 40, 1.0, kGround, rng, BlockMode::asymptotic);
    for (std::size_t k = 0; k < hist.outcomes.size(); ++k) {
        CHECK(hist.outcomes[k] == 0);
        CHECK(hist.p[k] == 1.0);
        CHECK(std::isnan(hist.noise[k]));
        CHECK(frobenius_norm(hist.states[k + 1] - kGround) < 1e-14);
    }
}

TEST_CASE("normalized noise is centered with unit second moment", "[chain]") {
    const double p = 0.7, q = 0.3;
    const double x0 = normalized_noise(p, q, 0);
    const double x1 = normalized_noise(p, q, 1);
    CHECK(std::abs(p * x0 + q * x1) < 1e-15);
    CHECK(std::abs(p * x0 * x0 + q * x1 * x1 - 1.0) < 1e-15);
    CHECK(x0 < 0.0);
    CHECK(x1 > 0.0);
    CHECK_THROWS_AS(normalized_noise(0.0, 1.0, 0), std::domain_error);
    CHECK_THROWS_AS(normalized_noise(1.0, 0.0, 1), std::domain_error);
}

TEST_CASE("chain states stay physical", "[chain]") {
    const auto spec = ModelSpec::amplitude_damping();
    Mat2 rho0 = mat2(0.5, cplx{0.0, 0.25}, cplx{0.0, -0.25}, 0.5);
    RngStream rng(21, stream_id(StreamPurpose::chain, 12));
    const auto hist = simulate_chain(spec, 128, 1.0, rho0, rng, BlockMode::exact);
    for (const Mat2& s : hist.states) {
        const auto v = validate_state(s, 1e-9);
        CHECK(v.pass);
        CHECK(std::abs(trace(s).real() - 1.0) < 1e-12);
    }
}

TEST_CASE("only the ground-projector ancilla is accepted", "[chain]") {
    const auto spec = ModelSpec::amplitude_damping();
    const auto blocks = build_unitary(spec, 10, BlockMode::exact);
    CHECK_THROWS_AS(TransitionMaps(blocks, spec.observable, diag2(0.0, 1.0)),
                    std::invalid_argument);
    RngStream rng(1, 1);
    CHECK_THROWS_AS(simulate_chain(spec, 10, -1.0, kGround, rng, BlockMode::exact),
                    std::invalid_argument);
}
