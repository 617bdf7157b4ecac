#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "qjump/rng.hpp"

namespace qjump {

struct MeanStderr {
    double mean = 0.0;
    double stderr_mean = 0.0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("mean_stderr: need at least 2 samples");
    double s = 0.0;
    for (double v : xs) s += v;
    const double m = s / xs.size();
    double q = 0.0;
    for (double v : xs) q += (v - m) * (v - m);
    const double var = q / (xs.size() - 1.0);
    return {m, std::sqrt(var / xs.size())};
}

// Least-squares slope/intercept of y against x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols_fit: need matched samples, at least 2");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("ols_fit: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

inline double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = p * (xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    const double w = pos - lo;
    return xs[lo] * (1.0 - w) + xs[hi] * w;
}

// Paired bootstrap over path indices for a log-log convergence table.
// errs[g][i] is the error statistic of path i at grid value ns[g]; every
// resample draws one common set of path indices and recomputes the per-n
// means, so the points stay coupled exactly as the common random numbers
// coupled them.
struct BootstrapSlope {
    double slope_point = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    // Fraction of resamples where the mean error at the largest n is strictly
    // below the mean error at the smallest n.
    double monotone_confidence = 0.0;
};

inline BootstrapSlope bootstrap_loglog_slope(const std::vector<int>& ns,
                                             const std::vector<std::vector<double>>& errs,
                                             int n_resamples, std::uint64_t seed,
                                             std::uint64_t stream) {
    if (ns.size() != errs.size() || ns.size() < 2)
        throw std::invalid_argument("bootstrap_loglog_slope: bad table shape");
    const std::size_t n_paths = errs.front().size();
    for (const auto& row : errs)
        if (row.size() != n_paths)
            throw std::invalid_argument("bootstrap_loglog_slope: ragged table");
    if (n_paths < 2) throw std::invalid_argument("bootstrap_loglog_slope: need paths");

    std::vector<double> lx(ns.size());
    for (std::size_t g = 0; g < ns.size(); ++g) lx[g] = std::log(static_cast<double>(ns[g]));

    const auto means_of = [&](const std::vector<std::size_t>& idx) {
        std::vector<double> m(ns.size(), 0.0);
        for (std::size_t g = 0; g < ns.size(); ++g) {
            double s = 0.0;
            for (std::size_t i : idx) s += errs[g][i];
            m[g] = s / idx.size();
        }
        return m;
    };

    std::vector<std::size_t> ident(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) ident[i] = i;
    const auto point_means = means_of(ident);
    for (double m : point_means)
        if (!(m > 0.0))
            throw std::invalid_argument("bootstrap_loglog_slope: nonpositive mean error");
    std::vector<double> ly(ns.size());
    for (std::size_t g = 0; g < ns.size(); ++g) ly[g] = std::log(point_means[g]);

    BootstrapSlope out;
    out.slope_point = ols_fit(lx, ly).slope;

    RngStream rng(seed, stream);
    std::vector<double> slopes;
    slopes.reserve(n_resamples);
    int mono = 0;
    std::vector<std::size_t> idx(n_paths);
    for (int b = 0; b < n_resamples; ++b) {
        for (std::size_t i = 0; i < n_paths; ++i)
            idx[i] = static_cast<std::size_t>(rng.uniform01() * n_paths);
        const auto m = means_of(idx);
        bool ok = true;
        std::vector<double> lyb(ns.size());
        for (std::size_t g = 0; g < ns.size(); ++g) {
            if (!(m[g] > 0.0)) {
                ok = false;
                break;
            }
            lyb[g] = std::log(m[g]);
        }
        if (!ok) continue;  // degenerate resample, skip
        slopes.push_back(ols_fit(lx, lyb).slope);
        if (m.back() < m.front()) ++mono;
    }
    if (slopes.empty()) throw std::runtime_error("bootstrap_loglog_slope: all resamples degenerate");
    out.ci_lo = percentile(slopes, 0.025);
    out.ci_hi = percentile(slopes, 0.975);
    out.monotone_confidence = static_cast<double>(mono) / n_resamples;
    return out;
}

// Two-sample chi-square homogeneity test on categorical counts. Cells whose
// pooled expected count under either sample falls below `min_expected` are
// merged into a single overflow cell before the statistic is formed.
struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
    int cells_used = 0;
    int cells_pooled = 0;
};

inline ChiSquareResult chi_square_homogeneity(const std::vector<std::int64_t>& a,
                                              const std::vector<std::int64_t>& b,
                                              double min_expected = 5.0) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("chi_square_homogeneity: mismatched counts");
    double na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 0 || b[i] < 0) throw std::invalid_argument("chi_square_homogeneity: negative count");
        na += static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]);
    }
    if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("chi_square_homogeneity: empty sample");
    const double total = na + nb;

    std::vector<double> ca, cb;  // kept cells
    double pa = 0.0, pb = 0.0;   // pooled overflow
    int pooled = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double rowsum = static_cast<double>(a[i] + b[i]);
        if (rowsum == 0.0) continue;  // structurally empty, contributes nothing
        const double e_min = rowsum * std::min(na, nb) / total;
        if (e_min < min_expected) {
            pa += static_cast<double>(a[i]);
            pb += static_cast<double>(b[i]);
            ++pooled;
        } else {
            ca.push_back(static_cast<double>(a[i]));
            cb.push_back(static_cast<double>(b[i]));
        }
    }
    if (pa + pb > 0.0 || ca.empty()) {
        ca.push_back(pa);
        cb.push_back(pb);
    }

    ChiSquareResult res;
    res.cells_used = static_cast<int>(ca.size());
    res.cells_pooled = pooled;
    res.dof = static_cast<int>(ca.size()) - 1;
    if (res.dof < 1) {  // single cell: both samples concentrated identically
        res.dof = 0;
        res.p_value = 1.0;
        return res;
    }
    double x2 = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
        const double rowsum = ca[i] + cb[i];
        const double ea = na * rowsum / total;
        const double eb = nb * rowsum / total;
        if (ea > 0.0) x2 += (ca[i] - ea) * (ca[i] - ea) / ea;
        if (eb > 0.0) x2 += (cb[i] - eb) * (cb[i] - eb) / eb;
    }
    res.statistic = x2;
    boost::math::chi_squared dist(res.dof);
    res.p_value = boost::math::cdf(boost::math::complement(dist, x2));
    return res;
}

}  // namespace qjump
