#pragma once

// Direct two-way ANOVA and ICC(2,1) computed in long double, with F quantiles found by
// bisection on Boost's F CDF. Shares no code with the library.

#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace morphoreg::testing {

struct OracleIcc {
    long double msr, msc, mse;
    double icc, lo, hi;
};

inline auto bisect_f_quantile(double p, double d1, double d2) -> double {
    boost::math::fisher_f_distribution<double> dist(d1, d2);
    double lo = 0.0, hi = 1.0;
    while (boost::math::cdf(dist, hi) < p) {
        hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (boost::math::cdf(dist, mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// rows[i][j]: subject i, rater j.
inline auto oracle_icc(const std::vector<std::vector<double>>& rows) -> OracleIcc {
    using L = long double;
    const auto n = rows.size(), k = rows.front().size();
    const L N = n, K = k;
    L grand = 0;
    for (const auto& r : rows)
        for (auto v : r) grand += v;
    grand /= N * K;
    L ss_total = 0, ss_rows = 0, ss_cols = 0;
    for (const auto& r : rows) {
        L m = 0;
        for (auto v : r) {
            m += v;
            ss_total += (v - grand) * (v - grand);
        }
        m /= K;
        ss_rows += K * (m - grand) * (m - grand);
    }
    for (std::size_t j = 0; j < k; ++j) {
        L m = 0;
        for (const auto& r : rows) m += r[j];
        m /= N;
        ss_cols += N * (m - grand) * (m - grand);
    }
    const L ss_err = ss_total - ss_rows - ss_cols;
    OracleIcc o{ss_rows / (N - 1), ss_cols / (K - 1), ss_err / ((N - 1) * (K - 1)), 0, 0, 0};
    const L icc = (o.msr - o.mse) / (o.msr + (K - 1) * o.mse + (K / N) * (o.msc - o.mse));
    o.icc = std::clamp(static_cast<double>(icc), -1.0, 1.0);

    const L a = K * icc / (N * (1 - icc));
    const L b = 1 + K * icc * (N - 1) / (N * (1 - icc));
    const L nu = (a * o.msc + b * o.mse) * (a * o.msc + b * o.mse) /
                 ((a * o.msc) * (a * o.msc) / (K - 1) + (b * o.mse) * (b * o.mse) / ((N - 1) * (K - 1)));
    const L fl = bisect_f_quantile(0.975, static_cast<double>(N - 1), static_cast<double>(nu));
    const L fu = bisect_f_quantile(0.975, static_cast<double>(nu), static_cast<double>(N - 1));
    const L lower = N * (o.msr - fl * o.mse) / (fl * (K * o.msc + (K * N - K - N) * o.mse) + N * o.msr);
    const L upper = N * (fu * o.msr - o.mse) / (K * o.msc + (K * N - K - N) * o.mse + N * fu * o.msr);
    o.lo = std::clamp(static_cast<double>(lower), -1.0, 1.0);
    o.hi = std::clamp(static_cast<double>(upper), -1.0, 1.0);
    return o;
}

// A random n x 2 matrix: reference drawn with random spread, prediction = reference * slope
// + offset + noise, so draws span the whole ICC range.
inline auto random_pairs(std::mt19937_64& rng, std::size_t n) -> std::vector<std::vector<double>> {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double spread = 0.1 + 5.0 * u(rng), noise = 3.0 * u(rng) * spread, slope = 2.0 * u(rng) - 0.5,
                 offset = spread * (u(rng) - 0.5), centre = 10.0 * (u(rng) - 0.5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> rows(n);
    for (auto& r : rows) {
        const double x = centre + spread * g(rng);
        r = {x, centre + slope * (x - centre) + offset + noise * g(rng)};
    }
    return rows;
}

}  // namespace morphoreg::testing
