#include "doctest.h"

#include "../support/icc_oracle.hpp"

#include "morphoreg/metrics/fdist.hpp"
#include "morphoreg/metrics/icc.hpp"
#include "morphoreg/common/csv.hpp"
#include "morphoreg/metrics/report.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <filesystem>
#include <fstream>

using namespace morphoreg;
using namespace morphoreg::metrics;
using morphoreg::testing::oracle_icc;
using morphoreg::testing::random_pairs;

namespace {

auto to_samples(const std::vector<std::vector<double>>& rows) -> PairedSamples {
    std::vector<double> v;
    for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return PairedSamples(rows.size(), rows.front().size(), v);
}

auto entry(std::string name, MeasurementKind kind, double icc) -> ReportEntry {
    ReportEntry e;
    e.measurement = std::move(name);
    e.kind = kind;
    e.result.icc = icc;
    e.result.ci_low = icc - 0.1;
    e.result.ci_high = icc + 0.05;
    e.result.band = band(icc);
    e.n = 20;
    return e;
}

}  // namespace

TEST_CASE("incomplete beta agrees with an independent implementation") {
    for (double a : {0.5, 1.0, 2.5, 12.0, 48.0}) {
        for (double b : {0.5, 1.0, 3.0, 24.5, 400.0}) {
            for (double x : {1e-4, 0.05, 0.3, 0.5, 0.77, 0.999}) {
                CHECK(regularized_beta(x, a, b) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-11));
            }
            for (double p : {1e-6, 0.025, 0.5, 0.975, 0.999999}) {
                const double x = inverse_regularized_beta(p, a, b);
                // Near 1 with a small b the CDF jumps by more than 1e-10 between adjacent doubles.
                const bool bracketed = boost::math::ibeta(a, b, std::nextafter(x, 0.0)) <= p &&
                                       p <= boost::math::ibeta(a, b, std::nextafter(x, 1.0));
                CHECK((std::abs(boost::math::ibeta(a, b, x) - p) <= 1e-10 || bracketed));
            }
        }
    }
    CHECK(regularized_beta(0.0, 2, 3) == 0.0);
    CHECK(regularized_beta(1.0, 2, 3) == 1.0);
    CHECK_THROWS_AS((void)regularized_beta(0.5, -1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS((void)inverse_regularized_beta(1.5, 1.0, 3), std::invalid_argument);
}

TEST_CASE("F quantile matches bisection on the F CDF") {
    for (double d1 : {1.0, 2.0, 9.0, 49.0}) {
        for (double d2 : {0.7, 1.0, 3.3, 12.0, 98.0}) {
            for (double p : {0.025, 0.5, 0.975}) {
                const double q = f_quantile(p, d1, d2);
                CHECK(q == doctest::Approx(testing::bisect_f_quantile(p, d1, d2)).epsilon(1e-9));
                CHECK(f_cdf(q, d1, d2) == doctest::Approx(p).epsilon(1e-10));
            }
        }
    }
    CHECK_THROWS_AS((void)f_quantile(0.0, 2, 3), std::invalid_argument);
}

TEST_CASE("band boundaries") {
    CHECK(band(0.39) == Band::Poor);
    CHECK(band(0.40) == Band::Fair);
    CHECK(band(0.5999) == Band::Fair);
    CHECK(band(0.60) == Band::Good);
    CHECK(band(0.7499) == Band::Good);
    CHECK(band(0.75) == Band::Excellent);
    CHECK(band(1.0) == Band::Excellent);
    CHECK(band(-0.3) == Band::Poor);
    for (auto b : {Band::Poor, Band::Fair, Band::Good, Band::Excellent}) {
        CHECK(parse_band(band_name(b)) == b);
    }
}

TEST_CASE("improvement percentages from published mean ICC pairs") {
    struct Case {
        double ours, base;
        const char* want;
    };
    for (auto c : {Case{0.665, 0.535, "24.30"}, Case{0.801, 0.755, "6.09"}, Case{0.717, 0.589, "21.73"},
                   Case{0.554, 0.387, "43.15"}}) {
        CAPTURE(c.want);
        CHECK(csv::format_fixed(round_to(improvement_pct(c.ours, c.base), 2), 2) == c.want);
    }
    CHECK_THROWS_AS((void)improvement_pct(0.5, 0.0), MetricsError);
    CHECK_THROWS_AS((void)improvement_pct(0.5, -0.1), MetricsError);
}

TEST_CASE("perfect agreement gives ICC 1 and a collapsed interval") {
    std::vector<double> x{1.0, 4.0, 2.5, 9.0, -3.0, 7.25};
    const auto r = icc_2_1(PairedSamples::from_columns(x, x));
    CHECK(std::abs(r.icc - 1.0) <= 1e-12);
    CHECK(r.ci_low == r.icc);
    CHECK(r.ci_high == r.icc);
    CHECK(r.band == Band::Excellent);
    CHECK_FALSE(r.degenerate);
}

TEST_CASE("predicting the mean gives ICC 0") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(3.0, 2.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(3 + t);
        for (auto& v : x) v = g(rng);
        double mean = 0.0;
        for (auto v : x) mean += v;
        mean /= static_cast<double>(x.size());
        const std::vector<double> y(x.size(), mean);
        const auto r = icc_2_1(PairedSamples::from_columns(x, y));
        CHECK(std::abs(r.icc) <= 1e-12);
        CHECK(r.components.msr == doctest::Approx(r.components.mse).epsilon(1e-12));
    }
}

TEST_CASE("identical rows are flagged rather than rejected") {
    std::vector<double> x(5, 2.0), y(5, 3.0);
    const auto r = icc_2_1(PairedSamples::from_columns(x, y));
    CHECK(r.degenerate);
    CHECK(r.icc == 0.0);
    CHECK(r.ci_low == r.icc);
    CHECK(r.ci_high == r.icc);
    const auto same = icc_2_1(PairedSamples::from_columns(x, x));
    CHECK(same.degenerate);
    CHECK(std::isfinite(same.icc));
}

TEST_CASE("sample validation") {
    CHECK_THROWS_AS(PairedSamples(2, 2, {1, 2, 3, 4}), MetricsError);
    CHECK_THROWS_AS(PairedSamples(3, 1, {1, 2, 3}), MetricsError);
    CHECK_THROWS_AS(PairedSamples(3, 2, {1, 2, 3}), MetricsError);
    CHECK_THROWS_AS(PairedSamples(3, 2, {1, 2, 3, NAN, 5, 6}), MetricsError);
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    CHECK_THROWS_AS(PairedSamples::from_columns(a, b), MetricsError);
    CHECK_THROWS_AS((void)icc_2_1(PairedSamples::from_columns(a, a), 1.0), MetricsError);
}

TEST_CASE("ICC and interval match the direct ANOVA oracle") {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<std::size_t> rows(3, 50);
    double worst_point = 0.0, worst_ci = 0.0;
    for (int t = 0; t < 300; ++t) {
        const auto m = random_pairs(rng, t == 0 ? 10 : rows(rng));
        const auto r = icc_2_1(to_samples(m));
        const auto o = oracle_icc(m);
        worst_point = std::max(worst_point, std::abs(r.icc - o.icc));
        worst_ci = std::max({worst_ci, std::abs(r.ci_low - o.lo), std::abs(r.ci_high - o.hi)});
        CHECK(r.band == band(r.icc));
    }
    CHECK(worst_point <= 1e-9);
    CHECK(worst_ci <= 1e-6);
}

TEST_CASE("ANOVA components add up and stay non-negative") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto m = random_pairs(rng, 4 + t % 40);
        const auto c = anova(to_samples(m));
        CHECK(c.msr >= 0.0);
        CHECK(c.msc >= 0.0);
        CHECK(c.mse >= 0.0);
        CHECK(c.ss_rows + c.ss_cols + c.ss_err == doctest::Approx(c.ss_total).epsilon(1e-9));
    }
    // Three raters.
    const auto c = anova(PairedSamples(4, 3, {1, 2, 3, 2, 2, 4, 5, 6, 6, 0, 1, 3}));
    CHECK(c.ss_rows + c.ss_cols + c.ss_err == doctest::Approx(c.ss_total).epsilon(1e-12));
}

TEST_CASE("ICC properties") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int t = 0; t < 200; ++t) {
        auto m = random_pairs(rng, 5 + t % 30);
        const auto base = icc_2_1(to_samples(m));

        // Common affine map of both columns.
        const double a = u(rng), c = 10.0 * (u(rng) - 2.0);
        auto mapped = m;
        for (auto& r : mapped)
            for (auto& v : r) v = a * v + c;
        CHECK(std::abs(icc_2_1(to_samples(mapped)).icc - base.icc) <= 1e-9);

        auto swapped = m;
        for (auto& r : swapped) std::swap(r[0], r[1]);
        CHECK(std::abs(icc_2_1(to_samples(swapped)).icc - base.icc) <= 1e-12);

        if (!base.degenerate) {
            CHECK(base.ci_low <= base.icc);
            CHECK(base.icc <= base.ci_high);
        }

        // Replicating consistent data never widens the interval.
        auto doubled = m;
        doubled.insert(doubled.end(), m.begin(), m.end());
        const auto wide = icc_2_1(to_samples(doubled));
        CHECK(wide.ci_high - wide.ci_low <= base.ci_high - base.ci_low + 1e-12);
    }
}

TEST_CASE("added prediction noise lowers ICC (sign test)") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.0, 1.0);
    int decreased = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> x(30), y(30), noisy(30);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = 5.0 + 2.0 * g(rng);
            y[i] = x[i] + 0.5 * g(rng);
            noisy[i] = y[i] + 1.0 * g(rng);
        }
        const double clean = icc_2_1(PairedSamples::from_columns(x, y)).icc;
        const double worse = icc_2_1(PairedSamples::from_columns(x, noisy)).icc;
        decreased += worse < clean ? 1 : 0;
    }
    // P(at least `decreased` decreases | fair coin).
    const boost::math::binomial_distribution<double> fair(trials, 0.5);
    const double p = decreased == 0 ? 1.0 : boost::math::cdf(boost::math::complement(fair, decreased - 1));
    CAPTURE(decreased);
    CHECK(p < 0.01);
}

TEST_CASE("aggregate statistics") {
    const std::vector<ReportEntry> one{entry("a", MeasurementKind::Volume, 0.7)};
    const auto a1 = aggregate(one);
    CHECK(a1.mean == doctest::Approx(0.7));
    CHECK(a1.sd == 0.0);

    const std::vector<ReportEntry> two{entry("a", MeasurementKind::Volume, 0.4),
                                       entry("b", MeasurementKind::Volume, 0.8)};
    const auto a2 = aggregate(two);
    CHECK(a2.mean == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(a2.sd == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(a2.min == 0.4);
    CHECK(a2.max == 0.8);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.2, 1.0);
    std::vector<ReportEntry> twelve;
    for (int i = 0; i < 12; ++i) {
        twelve.push_back(entry("m" + std::to_string(i), kAllKinds[static_cast<std::size_t>(i % 3)], u(rng)));
    }
    const auto report = make_report(twelve);
    CHECK(report.overall.count == 12);
    std::size_t per_kind_total = 0;
    for (auto kind : kAllKinds) {
        double s = 0.0, s2 = 0.0, n = 0.0;
        std::array<std::size_t, 4> bands{};
        for (const auto& e : twelve) {
            if (e.kind != kind) continue;
            s += e.result.icc;
            s2 += e.result.icc * e.result.icc;
            n += 1.0;
            ++bands[static_cast<std::size_t>(band(e.result.icc))];
        }
        const auto& agg = report.per_kind.at(kind);
        CHECK(agg.mean == doctest::Approx(s / n).epsilon(1e-12));
        CHECK(agg.sd == doctest::Approx(std::sqrt(std::max(0.0, s2 / n - (s / n) * (s / n)))).epsilon(1e-9));
        CHECK(agg.band_counts == bands);
        CHECK(agg.mean_ci_width == doctest::Approx(0.15).epsilon(1e-12));
        per_kind_total += agg.count;
    }
    CHECK(per_kind_total == report.overall.count);
    CHECK_THROWS_AS((void)make_report({}), MetricsError);
}

TEST_CASE("report CSV round trip and comparisons") {
    const auto dir = std::filesystem::temp_directory_path() / "morphoreg_metrics_test";
    std::filesystem::create_directories(dir);
    const auto report = make_report({entry("vol_blob0", MeasurementKind::Volume, 0.91),
                                     entry("thk_q0", MeasurementKind::Thickness, 0.655),
                                     entry("curv_q0", MeasurementKind::Curvature, 0.3)});
    write_report_csv(dir / "a.csv", report);
    {
        std::ifstream is(dir / "a.csv");
        std::string header;
        std::getline(is, header);
        CHECK(header == "measurement,kind,icc,ci_low,ci_high,band,n");
    }
    const auto back = read_report_csv(dir / "a.csv");
    REQUIRE(back.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.entries[i].measurement == report.entries[i].measurement);
        CHECK(back.entries[i].kind == report.entries[i].kind);
        CHECK(back.entries[i].result.icc == report.entries[i].result.icc);
        CHECK(back.entries[i].result.ci_low == report.entries[i].result.ci_low);
        CHECK(back.entries[i].result.band == report.entries[i].result.band);
        CHECK(back.entries[i].n == 20);
    }

    const auto base = make_report({entry("vol_blob0", MeasurementKind::Volume, 0.755),
                                   entry("thk_q0", MeasurementKind::Thickness, 0.589),
                                   entry("curv_q0", MeasurementKind::Curvature, 0.2)});
    const auto s = summary_json(report, &base);
    CHECK(s["comparison"]["per_kind"]["volume"]["improvement_pct"].get<double>() ==
          doctest::Approx(round_to(improvement_pct(0.91, 0.755), 2)));
    CHECK(s["per_kind"]["thickness"]["bands"]["good"] == 1);
    CHECK(s["overall"]["count"] == 3);

    const auto single = comparison_table({"ours"}, {report}, false);
    CHECK(single.find("0.622 +- 0.250") != std::string::npos);
    const auto pair = comparison_table({"base", "ours"}, {base, report}, true);
    CHECK(pair.find("ours vs base (%)") != std::string::npos);
    CHECK(pair.find("| 20.53 |") != std::string::npos);

    const auto other = make_report({entry("vol_blob9", MeasurementKind::Volume, 0.5)});
    CHECK_THROWS_AS((void)comparison_table({"a", "b"}, {report, other}, false), MetricsError);
    std::filesystem::remove_all(dir);
}
