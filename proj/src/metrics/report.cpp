#include "morphoreg/metrics/report.hpp"

#include "morphoreg/common/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace morphoreg::metrics {

auto aggregate(std::span<const ReportEntry> entries) -> Aggregate {
    Aggregate a;
    a.count = entries.size();
    if (entries.empty()) {
        return a;
    }
    double sum = 0.0, width = 0.0;
    a.min = a.max = entries.front().result.icc;
    for (const auto& e : entries) {
        sum += e.result.icc;
        width += e.result.ci_high - e.result.ci_low;
        a.min = std::min(a.min, e.result.icc);
        a.max = std::max(a.max, e.result.icc);
        ++a.band_counts[static_cast<std::size_t>(e.result.band)];
    }
    const auto n = static_cast<double>(entries.size());
    a.mean = sum / n;
    a.mean_ci_width = width / n;
    double sq = 0.0;
    for (const auto& e : entries) {
        sq += (e.result.icc - a.mean) * (e.result.icc - a.mean);
    }
    a.sd = std::sqrt(sq / n);
    return a;
}

auto make_report(std::vector<ReportEntry> entries) -> EvaluationReport {
    if (entries.empty()) {
        throw MetricsError("a report needs at least one measurement");
    }
    EvaluationReport r;
    r.entries = std::move(entries);
    r.overall = aggregate(r.entries);
    for (auto kind : kAllKinds) {
        std::vector<ReportEntry> subset;
        std::copy_if(r.entries.begin(), r.entries.end(), std::back_inserter(subset),
                     [kind](const ReportEntry& e) { return e.kind == kind; });
        if (!subset.empty()) {
            r.per_kind[kind] = aggregate(subset);
        }
    }
    return r;
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    os << "measurement,kind,icc,ci_low,ci_high,band,n\n";
    for (const auto& e : report.entries) {
        os << e.measurement << ',' << kind_name(e.kind) << ',' << csv::format_double(e.result.icc) << ','
           << csv::format_double(e.result.ci_low) << ',' << csv::format_double(e.result.ci_high) << ','
           << band_name(e.result.band) << ',' << e.n << '\n';
    }
    if (!os) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

auto read_report_csv(const std::filesystem::path& path) -> EvaluationReport {
    const auto table = csv::read(path);
    const auto c_m = table.column("measurement"), c_k = table.column("kind"), c_i = table.column("icc"),
               c_lo = table.column("ci_low"), c_hi = table.column("ci_high"), c_b = table.column("band"),
               c_n = table.column("n");
    std::vector<ReportEntry> entries;
    for (const auto& row : table.rows) {
        ReportEntry e;
        e.measurement = row[c_m];
        e.kind = parse_kind(row[c_k]);
        e.result.icc = std::stod(row[c_i]);
        e.result.ci_low = std::stod(row[c_lo]);
        e.result.ci_high = std::stod(row[c_hi]);
        e.result.band = parse_band(row[c_b]);
        e.n = std::stoul(row[c_n]);
        entries.push_back(std::move(e));
    }
    return make_report(std::move(entries));
}

namespace {

auto aggregate_json(const Aggregate& a) -> nlohmann::json {
    nlohmann::json bands;
    for (auto b : {Band::Poor, Band::Fair, Band::Good, Band::Excellent}) {
        bands[std::string(band_name(b))] = a.band_counts[static_cast<std::size_t>(b)];
    }
    return {{"count", a.count}, {"mean", a.mean},         {"sd", a.sd},          {"min", a.min},
            {"max", a.max},     {"mean_ci_width", a.mean_ci_width}, {"bands", bands}};
}

auto measurement_set(const EvaluationReport& r) -> std::set<std::string> {
    std::set<std::string> out;
    for (const auto& e : r.entries) {
        out.insert(e.measurement);
    }
    return out;
}

}  // namespace

auto summary_json(const EvaluationReport& report, const EvaluationReport* baseline) -> nlohmann::json {
    nlohmann::json out;
    out["overall"] = aggregate_json(report.overall);
    for (const auto& [kind, agg] : report.per_kind) {
        out["per_kind"][std::string(kind_name(kind))] = aggregate_json(agg);
    }
    if (baseline != nullptr) {
        nlohmann::json cmp;
        cmp["overall"] = {{"baseline_mean", baseline->overall.mean},
                          {"mean", report.overall.mean},
                          {"improvement_pct", round_to(improvement_pct(report.overall.mean, baseline->overall.mean), 2)}};
        for (const auto& [kind, agg] : report.per_kind) {
            const auto it = baseline->per_kind.find(kind);
            if (it == baseline->per_kind.end()) {
                continue;
            }
            nlohmann::json row{{"baseline_mean", it->second.mean}, {"mean", agg.mean}};
            if (it->second.mean > 0.0) {
                row["improvement_pct"] = round_to(improvement_pct(agg.mean, it->second.mean), 2);
            } else {
                row["improvement_pct"] = nullptr;
            }
            cmp["per_kind"][std::string(kind_name(kind))] = row;
        }
        out["comparison"] = cmp;
    }
    return out;
}

auto comparison_table(const std::vector<std::string>& labels, const std::vector<EvaluationReport>& reports,
                      bool markdown) -> std::string {
    if (reports.empty()) {
        throw MetricsError("comparison needs at least one report");
    }
    if (labels.size() != reports.size()) {
        throw MetricsError("one label per report is required");
    }
    const auto reference = measurement_set(reports.front());
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (measurement_set(reports[i]) != reference) {
            throw MetricsError("report '" + labels[i] + "' covers different measurements than '" + labels[0] + "'");
        }
    }

    std::vector<std::string> header{"kind", "row"};
    for (std::size_t i = 0; i < reports.size(); ++i) {
        header.push_back(labels[i]);
        if (i > 0) {
            header.push_back(labels[i] + " vs " + labels[0] + " (%)");
        }
    }
    std::vector<std::vector<std::string>> rows;
    auto emit = [&](const std::string& kind, const std::vector<const Aggregate*>& aggs) {
        auto mean_row = std::vector<std::string>{kind, "mean+-sd"};
        for (std::size_t i = 0; i < aggs.size(); ++i) {
            mean_row.push_back(csv::format_fixed(aggs[i]->mean, 3) + " +- " + csv::format_fixed(aggs[i]->sd, 3));
            if (i > 0) {
                mean_row.push_back(aggs[0]->mean > 0.0
                                       ? csv::format_fixed(round_to(improvement_pct(aggs[i]->mean, aggs[0]->mean), 2), 2)
                                       : "n/a");
            }
        }
        rows.push_back(mean_row);
        for (auto b : {Band::Poor, Band::Fair, Band::Good, Band::Excellent}) {
            auto row = std::vector<std::string>{kind, std::string(band_name(b))};
            for (std::size_t i = 0; i < aggs.size(); ++i) {
                row.push_back(std::to_string(aggs[i]->band_counts[static_cast<std::size_t>(b)]) + "/" +
                              std::to_string(aggs[i]->count));
                if (i > 0) {
                    row.emplace_back("");
                }
            }
            rows.push_back(row);
        }
    };
    for (auto kind : kAllKinds) {
        if (!reports.front().per_kind.contains(kind)) {
            continue;
        }
        std::vector<const Aggregate*> aggs;
        for (const auto& r : reports) {
            aggs.push_back(&r.per_kind.at(kind));
        }
        emit(std::string(kind_name(kind)), aggs);
    }
    std::vector<const Aggregate*> overall;
    for (const auto& r : reports) {
        overall.push_back(&r.overall);
    }
    emit("overall", overall);

    std::ostringstream os;
    if (markdown) {
        auto line = [&](const std::vector<std::string>& cells) {
            os << '|';
            for (const auto& c : cells) os << ' ' << c << " |";
            os << '\n';
        };
        line(header);
        os << '|';
        for (std::size_t i = 0; i < header.size(); ++i) os << " --- |";
        os << '\n';
        for (const auto& r : rows) line(r);
    } else {
        std::vector<std::size_t> width(header.size());
        for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
        for (const auto& r : rows)
            for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                os << cells[i] << std::string(width[i] - cells[i].size() + 2, ' ');
            }
            os << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
    }
    return os.str();
}

}  // namespace morphoreg::metrics
