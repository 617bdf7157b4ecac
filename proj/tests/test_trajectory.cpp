#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "qjump/flow.hpp"
#include "qjump/matrix.hpp"
#include "qjump/model.hpp"
#include "qjump/poisson.hpp"
#include "qjump/trajectory.hpp"

using namespace qjump;

namespace {
const Mat2 kExcited = diag2(0.0, 1.0);
const Mat2 kGround = diag2(1.0, 0.0);

FlowParams damping_params() {
    const auto spec = ModelSpec::amplitude_damping();
    return FlowParams(spec.H, spec.C);
}

std::vector<double> uniform_grid(double T, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = T * i / (points - 1);
    return g;
}
}  // namespace

TEST_CASE("jump target of the lowering coupling is the ground state", "[trajectory]") {
    const auto p = damping_params();
    CHECK(frobenius_norm(apply_jump(p, kExcited) - kGround) < 1e-15);
    const Mat2 mixed = mat2(0.5, cplx{0.2, 0.1}, cplx{0.2, -0.1}, 0.5);
    CHECK(frobenius_norm(apply_jump(p, mixed) - kGround) < 1e-15);
    CHECK_THROWS_AS(apply_jump(p, kGround), std::runtime_error);
}

TEST_CASE("empty realization reproduces the deterministic flow", "[trajectory]") {
    const auto p = damping_params();
    PoissonRealization r;
    r.T = 1.0;
    r.K = p.K + 1.0;

    SECTION("the excited state is a fixed point of the no-detection flow") {
        const auto path = solve_path(kExcited, r, p, uniform_grid(1.0, 11));
        REQUIRE(path.states.size() == 11);
        for (const auto& s : path.states) CHECK(frobenius_norm(s - kExcited) < 1e-12);
        for (int c : path.counting) CHECK(c == 0);
        CHECK(path.jump_times.empty());
        CHECK(std::abs(path.compensator_T - 1.0) < 1e-10);
    }

    SECTION("grid output agrees with direct integration from zero") {
        const Mat2 rho0 = mat2(0.5, cplx{0.2, 0.1}, cplx{0.2, -0.1}, 0.5);
        const auto path = solve_path(rho0, r, p, uniform_grid(1.0, 6));
        for (std::size_t i = 0; i < path.grid.size(); ++i) {
            const Mat2 want = integrate_flow(rho0, path.grid[i], p).state;
            CHECK(frobenius_norm(path.states[i] - want) < 1e-9);
        }
        CHECK(path.max_trace_drift < 1e-8);
    }
}

TEST_CASE("single accepted point: jump, absorption, cadlag grid values", "[trajectory]") {
    const auto p = damping_params();
    PoissonRealization r;
    r.T = 1.0;
    r.K = p.K + 1.0;
    // Intensity at the left limit of 0.4 is 1 (state still excited), so the
    // first mark is accepted; the second lands on the dark ground state and
    // must be rejected by thinning.
    r.points = {{0.4, 0.5}, {0.8, 0.5}};
    const std::vector<double> grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    const auto path = solve_path(kExcited, r, p, grid);

    REQUIRE(path.jump_times.size() == 1);
    CHECK(path.jump_times[0] == 0.4);
    CHECK(frobenius_norm(path.jump_states[0] - kGround) < 1e-12);

    const std::vector<int> want_counts{0, 0, 1, 1, 1, 1};
    REQUIRE(path.counting.size() == want_counts.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(path.counting[i] == want_counts[i]);
        const Mat2& want = grid[i] < 0.4 ? kExcited : kGround;
        CHECK(frobenius_norm(path.states[i] - want) < 1e-10);
    }
    // compensator integrates intensity 1 up to the click, 0 afterwards
    CHECK(std::abs(path.compensator_T - 0.4) < 1e-10);
}

TEST_CASE("solve_path rejects malformed inputs", "[trajectory]") {
    const auto p = damping_params();
    PoissonRealization r;
    r.T = 1.0;
    r.K = 0.5;  // below the intensity bound K = 1
    CHECK_THROWS_AS(solve_path(kExcited, r, p, uniform_grid(1.0, 3)), std::invalid_argument);
    r.K = 2.0;
    CHECK_THROWS_AS(solve_path(kExcited, r, p, std::vector<double>{0.5, 0.2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_path(kExcited, r, p, std::vector<double>{0.0, 1.5}),
                    std::invalid_argument);
}

TEST_CASE("ensemble mean is deterministic and worker-count independent", "[trajectory]") {
    const auto p = damping_params();
    const auto grid = uniform_grid(1.0, 5);
    const auto a = monte_carlo_mean(p, kExcited, 1.0, grid, 40, 123, 1);
    const auto b = monte_carlo_mean(p, kExcited, 1.0, grid, 40, 123, 1);
    const auto c = monte_carlo_mean(p, kExcited, 1.0, grid, 40, 123, 2);
    for (std::size_t t = 0; t < grid.size(); ++t) {
        CHECK(frobenius_norm(a.mean[t] - b.mean[t]) == 0.0);
        CHECK(frobenius_norm(a.mean[t] - c.mean[t]) == 0.0);
        CHECK(frobenius_norm(a.stderr_entries[t] - c.stderr_entries[t]) == 0.0);
    }
    CHECK(a.jumps_per_path == c.jumps_per_path);
    CHECK_THROWS_AS(monte_carlo_mean(p, kExcited, 1.0, grid, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("ensemble mean tracks the master equation", "[trajectory]") {
    const auto p = damping_params();
    const std::vector<double> grid{0.0, 0.5, 1.0};
    const int n_paths = 400;
    const auto mp = monte_carlo_mean(p, kExcited, 1.0, grid, n_paths, 7, 1);
    for (std::size_t t = 0; t < grid.size(); ++t) {
        const double want = std::exp(-grid[t]);  // excited population decays at unit rate
        const double got = mp.mean[t](1, 1).real();
        const double se = mp.stderr_entries[t](1, 1).real();
        CHECK(std::abs(got - want) < 5.0 * se + 1e-6);
        CHECK(std::abs(trace(mp.mean[t]).real() - 1.0) < 1e-12);
    }
    for (int j : mp.jumps_per_path) {
        CHECK(j >= 0);
        CHECK(j <= 1);  // absorption: at most one click per path
    }
    for (double c : mp.compensator_per_path) {
        CHECK(c >= 0.0);
        CHECK(c <= p.K * 1.0 + 1e-9);
    }
}
