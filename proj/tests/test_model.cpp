#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qjump/matrix.hpp"
#include "qjump/model.hpp"

using namespace qjump;

TEST_CASE("observable validation catches broken projectors", "[model]") {
    auto obs = ObservableSpec::diagonal();
    CHECK_NOTHROW(obs.validate());
    CHECK(obs.is_diagonal());

    obs.P0 = mat2(0.5, 0.5, 0.5, 0.5);  // projector, but P0 + P1 != I
    CHECK_THROWS_AS(obs.validate(), std::invalid_argument);

    obs = ObservableSpec::diagonal();
    obs.P0 = diag2(0.9, 0.0);  // not idempotent
    CHECK_THROWS_AS(obs.validate(), std::invalid_argument);
}

TEST_CASE("total hamiltonian assembles the three advertised pieces", "[model]") {
    const auto m = ModelSpec::amplitude_damping();
    const int n = 25;
    const Mat4 h = build_total_hamiltonian(m, n);
    const Mat4 want = kron_sys_anc(m.H, Mat2::identity()) +
                      kron_sys_anc(Mat2::identity(), diag2(1.0, 0.0)) +
                      (1.0 / std::sqrt(static_cast<double>(n))) *
                          (kron_sys_anc(m.C, mat2(0.0, 0.0, 1.0, 0.0)) +
                           kron_sys_anc(adjoint(m.C), mat2(0.0, 1.0, 0.0, 0.0)));
    CHECK(frobenius_norm(h - want) < 1e-14);
    CHECK(hermiticity_defect(h) < 1e-14);
}

TEST_CASE("exact blocks assemble to a unitary", "[model]") {
    const auto m = ModelSpec::amplitude_damping();
    for (int n : {2, 10, 100, 10000}) {
        const auto b = build_unitary(m, n, BlockMode::exact);
        CHECK(b.unitarity_defect() < 1e-12);
        CHECK(b.n == n);
    }
}

TEST_CASE("exact blocks approach the advertised asymptotics", "[model]") {
    const auto m = ModelSpec::amplitude_damping();
    const Mat2 d0 = cplx{0.0, -1.0} * m.H - 0.5 * (adjoint(m.C) * m.C);
    double prev00 = 1e9, prev10 = 1e9;
    for (int n : {64, 256, 1024, 4096}) {
        const double h = 1.0 / n;
        const auto b = build_unitary(m, n, BlockMode::exact);
        const double d00 = frobenius_norm(b.L00 - (Mat2::identity() + h * d0));
        const double d10 = frobenius_norm(b.L10 - std::sqrt(h) * m.C);
        // remainder order n^(-3/2): the normalized defect must not grow
        CHECK(d00 <= 2.0 * std::pow(h, 1.5));
        CHECK(d10 <= 2.0 * std::pow(h, 1.5));
        CHECK(d00 < prev00);
        CHECK(d10 < prev10);
        prev00 = d00;
        prev10 = d10;
    }
}

TEST_CASE("asymptotic blocks are the literal truncation", "[model]") {
    const auto m = ModelSpec::amplitude_damping();
    const int n = 50;
    const double h = 1.0 / n;
    const auto b = build_unitary(m, n, BlockMode::asymptotic);
    const Mat2 d0 = cplx{0.0, -1.0} * m.H - 0.5 * (adjoint(m.C) * m.C);
    const Mat2 d1 = cplx{0.0, -1.0} * m.H - 0.5 * (m.C * adjoint(m.C));
    CHECK(frobenius_norm(b.L00 - (Mat2::identity() + h * d0)) == 0.0);
    CHECK(frobenius_norm(b.L10 - std::sqrt(h) * m.C) == 0.0);
    CHECK(frobenius_norm(b.L01 + std::sqrt(h) * adjoint(m.C)) == 0.0);
    CHECK(frobenius_norm(b.L11 - (Mat2::identity() + h * d1)) == 0.0);
}

TEST_CASE("free evolution with no coupling leaves the ancilla alone", "[model]") {
    ModelSpec m = ModelSpec::amplitude_damping();
    m.C = Mat2::zero();
    m.H = Mat2::zero();
    const auto b = build_unitary(m, 10, BlockMode::exact);
    CHECK(frobenius_norm(b.L00 - Mat2::identity()) < 1e-14);
    CHECK(frobenius_norm(b.L10) < 1e-14);
    CHECK(frobenius_norm(b.L01) < 1e-14);
    CHECK(frobenius_norm(b.L11 - Mat2::identity()) < 1e-14);
}

TEST_CASE("exact and asymptotic blocks converge to each other", "[model]") {
    const auto m = ModelSpec::amplitude_damping();
    double prev = 1e9;
    for (int n : {16, 64, 256}) {
        const auto e = build_unitary(m, n, BlockMode::exact);
        const auto a = build_unitary(m, n, BlockMode::asymptotic);
        const double diff = frobenius_norm(e.L00 - a.L00) + frobenius_norm(e.L10 - a.L10);
        CHECK(diff < prev);
        prev = diff;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("model validation", "[model]") {
    auto m = ModelSpec::amplitude_damping();
    CHECK_NOTHROW(m.validate());
    m.H = mat2(0.0, cplx{0.0, 0.3}, cplx{0.0, 0.3}, 0.0);  // anti-hermitian off-diagonal
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);

    m = ModelSpec::amplitude_damping();
    m.beta = diag2(0.7, 0.7);
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
