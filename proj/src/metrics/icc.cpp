#include "morphoreg/metrics/icc.hpp"

#include "morphoreg/metrics/fdist.hpp"

#include <algorithm>
#include <cmath>

namespace morphoreg::metrics {

PairedSamples::PairedSamples(std::size_t n, std::size_t k, std::vector<double> values)
    : n_(n), k_(k), values_(std::move(values)) {
    if (n < 3) {
        throw MetricsError("ICC needs at least 3 rows, got " + std::to_string(n));
    }
    if (k < 2) {
        throw MetricsError("ICC needs at least 2 columns, got " + std::to_string(k));
    }
    if (values_.size() != n * k) {
        throw MetricsError("sample matrix has " + std::to_string(values_.size()) + " values, expected " +
                           std::to_string(n * k));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw MetricsError("non-finite sample at row " + std::to_string(i / k) + ", column " +
                               std::to_string(i % k));
        }
    }
}

auto PairedSamples::from_columns(std::span<const double> reference, std::span<const double> prediction)
    -> PairedSamples {
    if (reference.size() != prediction.size()) {
        throw MetricsError("reference has " + std::to_string(reference.size()) + " rows, prediction has " +
                           std::to_string(prediction.size()));
    }
    std::vector<double> v;
    v.reserve(2 * reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i) {
        v.push_back(reference[i]);
        v.push_back(prediction[i]);
    }
    return PairedSamples(reference.size(), 2, std::move(v));
}

auto band(double icc) -> Band {
    if (icc < 0.40) return Band::Poor;
    if (icc < 0.60) return Band::Fair;
    if (icc < 0.75) return Band::Good;
    return Band::Excellent;
}

auto band_name(Band b) -> std::string_view {
    switch (b) {
        case Band::Poor: return "poor";
        case Band::Fair: return "fair";
        case Band::Good: return "good";
        case Band::Excellent: return "excellent";
    }
    return "poor";
}

auto parse_band(std::string_view text) -> Band {
    for (auto b : {Band::Poor, Band::Fair, Band::Good, Band::Excellent}) {
        if (band_name(b) == text) {
            return b;
        }
    }
    throw MetricsError("unknown band '" + std::string(text) + "'");
}

auto anova(const PairedSamples& s) -> AnovaComponents {
    const auto n = s.rows(), k = s.cols();
    const auto dn = static_cast<double>(n), dk = static_cast<double>(k);
    std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            row_mean[i] += s.at(i, j);
            col_mean[j] += s.at(i, j);
            grand += s.at(i, j);
        }
    }
    for (auto& r : row_mean) r /= dk;
    for (auto& c : col_mean) c /= dn;
    grand /= dn * dk;

    AnovaComponents a;
    a.n = n;
    a.k = k;
    for (std::size_t i = 0; i < n; ++i) {
        a.ss_rows += (row_mean[i] - grand) * (row_mean[i] - grand);
        for (std::size_t j = 0; j < k; ++j) {
            const double dev = s.at(i, j) - grand;
            a.ss_total += dev * dev;
            // Residual summed directly rather than by subtraction, so it never goes negative.
            const double e = s.at(i, j) - row_mean[i] - col_mean[j] + grand;
            a.ss_err += e * e;
        }
    }
    a.ss_rows *= dk;
    for (std::size_t j = 0; j < k; ++j) {
        a.ss_cols += (col_mean[j] - grand) * (col_mean[j] - grand);
    }
    a.ss_cols *= dn;
    a.msr = a.ss_rows / (dn - 1.0);
    a.msc = a.ss_cols / (dk - 1.0);
    a.mse = a.ss_err / ((dn - 1.0) * (dk - 1.0));
    return a;
}

auto icc_2_1(const PairedSamples& samples, double confidence) -> IccResult {
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw MetricsError("confidence must lie in (0, 1)");
    }
    IccResult r;
    r.components = anova(samples);
    const auto& c = r.components;
    const auto dn = static_cast<double>(c.n), dk = static_cast<double>(c.k);

    const double denom = c.msr + (dk - 1.0) * c.mse + (dk / dn) * (c.msc - c.mse);
    r.degenerate = c.ss_rows == 0.0;
    // Small samples can push the raw estimate below -1; the interval uses the raw value.
    const double raw = denom > 0.0 ? (c.msr - c.mse) / denom : 0.0;
    r.icc = std::clamp(raw, -1.0, 1.0);
    r.band = band(r.icc);

    if (r.degenerate || r.icc >= 1.0 - 1e-12) {
        r.ci_low = r.ci_high = r.icc;
        return r;
    }

    const double icc = raw;
    const double a = dk * icc / (dn * (1.0 - icc));
    const double b = 1.0 + dk * icc * (dn - 1.0) / (dn * (1.0 - icc));
    const double v_num = (a * c.msc + b * c.mse) * (a * c.msc + b * c.mse);
    const double v_den =
        (a * c.msc) * (a * c.msc) / (dk - 1.0) + (b * c.mse) * (b * c.mse) / ((dn - 1.0) * (dk - 1.0));
    const double nu = v_num / v_den;
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        r.ci_low = r.ci_high = r.icc;
        return r;
    }

    const double q = 1.0 - 0.5 * (1.0 - confidence);
    const double fl = f_quantile(q, dn - 1.0, nu);
    const double fu = f_quantile(q, nu, dn - 1.0);
    const double mix = dk * c.msc + (dk * dn - dk - dn) * c.mse;
    double lo = dn * (c.msr - fl * c.mse) / (fl * mix + dn * c.msr);
    double hi = dn * (fu * c.msr - c.mse) / (mix + dn * fu * c.msr);
    lo = std::clamp(lo, -1.0, 1.0);
    hi = std::clamp(hi, -1.0, 1.0);
    r.ci_low = std::min(lo, r.icc);
    r.ci_high = std::max(hi, r.icc);
    return r;
}

auto improvement_pct(double ours, double baseline) -> double {
    if (!(baseline > 0.0)) {
        throw MetricsError("improvement_pct needs a positive baseline, got " + std::to_string(baseline));
    }
    return 100.0 * (ours - baseline) / baseline;
}

auto round_to(double value, int decimals) -> double {
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale) / scale;
}

}  // namespace morphoreg::metrics
