#pragma once

#include "morphoreg/metrics/icc.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace morphoreg::metrics {

struct ReportEntry {
    std::string measurement;
    MeasurementKind kind = MeasurementKind::Volume;
    IccResult result;
    std::size_t n = 0;
};

struct Aggregate {
    std::size_t count = 0;
    double mean = 0.0;
    double sd = 0.0;  // population
    double min = 0.0;
    double max = 0.0;
    double mean_ci_width = 0.0;
    std::array<std::size_t, 4> band_counts{};  // indexed by Band
};

struct EvaluationReport {
    std::vector<ReportEntry> entries;
    Aggregate overall;
    std::map<MeasurementKind, Aggregate> per_kind;
};

[[nodiscard]] auto aggregate(std::span<const ReportEntry> entries) -> Aggregate;
[[nodiscard]] auto make_report(std::vector<ReportEntry> entries) -> EvaluationReport;

// measurement,kind,icc,ci_low,ci_high,band,n
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);
[[nodiscard]] auto read_report_csv(const std::filesystem::path& path) -> EvaluationReport;

// Structured summary; with a baseline, adds improvement_pct per kind and overall.
[[nodiscard]] auto summary_json(const EvaluationReport& report, const EvaluationReport* baseline = nullptr)
    -> nlohmann::json;

// Band-count table and mean +- sd rows for one or more reports, side by side. Reports
// must cover the same measurements. Improvement columns are relative to the first report.
[[nodiscard]] auto comparison_table(const std::vector<std::string>& labels,
                                    const std::vector<EvaluationReport>& reports, bool markdown) -> std::string;

}  // namespace morphoreg::metrics
