#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "qjump/rng.hpp"
#include "qjump/stats.hpp"

using namespace qjump;

TEST_CASE("mean and standard error, hand values", "[stats]") {
    const auto ms = mean_stderr({1.0, 2.0, 3.0, 4.0});
    CHECK(std::abs(ms.mean - 2.5) < 1e-15);
    CHECK(std::abs(ms.stderr_mean - std::sqrt(5.0 / 12.0)) < 1e-15);
    CHECK_THROWS_AS(mean_stderr({1.0}), std::invalid_argument);
}

TEST_CASE("least squares on a straight line", "[stats]") {
    const auto f = ols_fit({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0});
    CHECK(std::abs(f.slope - 2.0) < 1e-15);
    CHECK(std::abs(f.intercept - 1.0) < 1e-15);
    CHECK_THROWS_AS(ols_fit({1.0, 1.0}, {0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ols_fit({1.0, 2.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("percentile interpolates and ignores input order", "[stats]") {
    const std::vector<double> xs{4.0, 1.0, 3.0, 2.0};
    CHECK(percentile(xs, 0.0) == 1.0);
    CHECK(percentile(xs, 1.0) == 4.0);
    CHECK(std::abs(percentile(xs, 0.5) - 2.5) < 1e-15);
    CHECK(percentile({7.0}, 0.3) == 7.0);
    CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
}

TEST_CASE("paired bootstrap recovers an exact power law", "[stats]") {
    const std::vector<int> ns{8, 16, 32, 64};
    const int n_paths = 50;
    // err[g][i] = c_i / n_g: every resample sees slope exactly -1
    std::vector<std::vector<double>> errs(ns.size(), std::vector<double>(n_paths));
    for (std::size_t g = 0; g < ns.size(); ++g)
        for (int i = 0; i < n_paths; ++i)
            errs[g][i] = (1.0 + 0.01 * i) / ns[g];

    const auto bs = bootstrap_loglog_slope(ns, errs, 200, 42, 1);
    CHECK(std::abs(bs.slope_point + 1.0) < 1e-12);
    CHECK(std::abs(bs.ci_lo + 1.0) < 1e-12);
    CHECK(std::abs(bs.ci_hi + 1.0) < 1e-12);
    CHECK(bs.monotone_confidence == 1.0);

    const auto rerun = bootstrap_loglog_slope(ns, errs, 200, 42, 1);
    CHECK(bs.ci_lo == rerun.ci_lo);

    std::vector<std::vector<double>> ragged = errs;
    ragged[1].pop_back();
    CHECK_THROWS_AS(bootstrap_loglog_slope(ns, ragged, 10, 1, 1), std::invalid_argument);
    std::vector<std::vector<double>> flat(ns.size(), std::vector<double>(n_paths, 0.0));
    CHECK_THROWS_AS(bootstrap_loglog_slope(ns, flat, 10, 1, 1), std::invalid_argument);
}

TEST_CASE("chi-square homogeneity: identical, disjoint, pooled", "[stats]") {
    SECTION("identical samples give a unit p-value") {
        const std::vector<std::int64_t> a{50, 60, 70};
        const auto res = chi_square_homogeneity(a, a);
        CHECK(res.statistic == 0.0);
        CHECK(res.dof == 2);
        CHECK(res.p_value == 1.0);
        CHECK(res.cells_used == 3);
        CHECK(res.cells_pooled == 0);
    }

    SECTION("disjoint supports are rejected hard") {
        const auto res = chi_square_homogeneity({200, 0}, {0, 200});
        CHECK(std::abs(res.statistic - 400.0) < 1e-9);
        CHECK(res.dof == 1);
        CHECK(res.p_value < 1e-10);
    }

    SECTION("sparse cells are pooled into one overflow cell") {
        const auto res = chi_square_homogeneity({1000, 2, 1}, {1000, 1, 2});
        CHECK(res.cells_pooled == 2);
        CHECK(res.cells_used == 2);
        CHECK(res.dof == 1);
        CHECK(res.p_value > 0.5);
    }

    SECTION("single-cell tables degrade to dof 0 and p = 1") {
        const auto res = chi_square_homogeneity({100, 0}, {100, 0});
        CHECK(res.dof == 0);
        CHECK(res.p_value == 1.0);
    }

    SECTION("input validation") {
        CHECK_THROWS_AS(chi_square_homogeneity({1, 2}, {1}), std::invalid_argument);
        CHECK_THROWS_AS(chi_square_homogeneity({-1, 2}, {1, 2}), std::invalid_argument);
        CHECK_THROWS_AS(chi_square_homogeneity({0, 0}, {1, 2}), std::invalid_argument);
    }
}

TEST_CASE("chi-square tail calibration at the textbook critical point", "[stats]") {
    // 95th percentile of chi-square with one degree of freedom
    boost::math::chi_squared dist(1);
    const double p = boost::math::cdf(boost::math::complement(dist, 3.841458820694124));
    CHECK(std::abs(p - 0.05) < 1e-9);
}

TEST_CASE("samples from one law pass the homogeneity test", "[stats]") {
    const std::vector<double> cdf{0.4, 0.7, 0.9, 1.0};
    std::vector<std::int64_t> a(4, 0), b(4, 0);
    RngStream rng(19, stream_id(StreamPurpose::scratch, 0));
    auto draw = [&]() {
        const double u = rng.uniform01();
        std::size_t c = 0;
        while (u >= cdf[c]) ++c;
        return c;
    };
    for (int i = 0; i < 2000; ++i) ++a[draw()];
    for (int i = 0; i < 2000; ++i) ++b[draw()];
    const auto res = chi_square_homogeneity(a, b);
    CHECK(res.p_value > 0.001);
    CHECK(res.cells_used == 4);
}
