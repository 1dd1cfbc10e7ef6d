#pragma once

#include "morphoreg/common/measurement.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace morphoreg::metrics {

struct MetricsError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// n rows by k columns, row-major. Column 0 is the reference, column 1 the prediction.
class PairedSamples {
public:
    PairedSamples(std::size_t n, std::size_t k, std::vector<double> values);
    static auto from_columns(std::span<const double> reference, std::span<const double> prediction) -> PairedSamples;

    [[nodiscard]] auto rows() const -> std::size_t { return n_; }
    [[nodiscard]] auto cols() const -> std::size_t { return k_; }
    [[nodiscard]] auto at(std::size_t i, std::size_t j) const -> double { return values_[i * k_ + j]; }

private:
    std::size_t n_;
    std::size_t k_;
    std::vector<double> values_;
};

struct AnovaComponents {
    double ss_total = 0.0;
    double ss_rows = 0.0;
    double ss_cols = 0.0;
    double ss_err = 0.0;
    double msr = 0.0;
    double msc = 0.0;
    double mse = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
};

enum class Band { Poor, Fair, Good, Excellent };

[[nodiscard]] auto band(double icc) -> Band;
[[nodiscard]] auto band_name(Band b) -> std::string_view;
[[nodiscard]] auto parse_band(std::string_view text) -> Band;

struct IccResult {
    double icc = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    Band band = Band::Poor;
    AnovaComponents components;
    // Set when every row is identical (no between-subject variance).
    bool degenerate = false;
};

[[nodiscard]] auto anova(const PairedSamples& samples) -> AnovaComponents;

// ICC(2,1): two-way model, absolute agreement, single rater.
[[nodiscard]] auto icc_2_1(const PairedSamples& samples, double confidence = 0.95) -> IccResult;

// 100 * (ours - baseline) / baseline.
[[nodiscard]] auto improvement_pct(double ours, double baseline) -> double;
[[nodiscard]] auto round_to(double value, int decimals) -> double;

}  // namespace morphoreg::metrics
