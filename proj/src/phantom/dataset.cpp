#include "morphoreg/phantom/dataset.hpp"

#include "morphoreg/common/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace morphoreg::phantom {

auto split_name(Split s) -> std::string_view {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "train";
}

auto parse_split(std::string_view text) -> Split {
    for (auto s : {Split::Train, Split::Validation, Split::Test}) {
        if (split_name(s) == text) return s;
    }
    if (text == "val") return Split::Validation;
    throw PhantomError("unknown split '" + std::string(text) + "'");
}

auto split_subjects(const std::vector<std::uint64_t>& subject_ids, const SplitRatios& r, std::uint64_t seed)
    -> std::map<std::uint64_t, Split> {
    const std::array<double, 3> ratios{r.train, r.validation, r.test};
    for (auto v : ratios) {
        if (!(v >= 0.0)) throw PhantomError("split ratios must be non-negative");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw PhantomError("split ratios must sum to 1");
    }
    std::set<std::uint64_t> unique(subject_ids.begin(), subject_ids.end());
    if (unique.size() != subject_ids.size()) {
        throw PhantomError("duplicate subject ids");
    }
    const auto wanted = static_cast<std::size_t>(std::count_if(ratios.begin(), ratios.end(), [](double v) { return v > 0; }));
    if (subject_ids.size() < std::max<std::size_t>(3, wanted)) {
        throw PhantomError("need at least " + std::to_string(std::max<std::size_t>(3, wanted)) +
                           " subjects to split, got " + std::to_string(subject_ids.size()));
    }
    const auto n = subject_ids.size();
    std::array<std::size_t, 3> count{};
    for (std::size_t i = 0; i < 2; ++i) {
        count[i] = static_cast<std::size_t>(std::llround(ratios[i] * static_cast<double>(n)));
        if (ratios[i] > 0.0) count[i] = std::max<std::size_t>(count[i], 1);
    }
    if (count[0] + count[1] + (ratios[2] > 0.0 ? 1 : 0) > n) {
        // Rounding left nothing for the test split; take one from the largest.
        --count[count[0] >= count[1] ? 0 : 1];
    }
    count[2] = n - count[0] - count[1];

    std::vector<std::uint64_t> order(subject_ids.begin(), subject_ids.end());
    std::sort(order.begin(), order.end());
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::map<std::uint64_t, Split> out;
    std::size_t i = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t c = 0; c < count[s]; ++c, ++i) {
            out[order[i]] = static_cast<Split>(s);
        }
    }
    return out;
}

auto Manifest::rows_in(Split s) const -> std::vector<ManifestRow> {
    std::vector<ManifestRow> out;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(out), [s](const ManifestRow& r) { return r.split == s; });
    return out;
}

auto Manifest::kinds() const -> std::vector<MeasurementKind> {
    std::vector<MeasurementKind> out;
    for (const auto& n : names) out.push_back(kind_of_column(n));
    return out;
}

void check_disjoint(const Manifest& m) {
    std::map<std::uint64_t, Split> seen;
    for (const auto& r : m.rows) {
        const auto [it, inserted] = seen.emplace(r.subject_id, r.split);
        if (!inserted && it->second != r.split) {
            throw PhantomError("subject " + std::to_string(r.subject_id) + " appears in both " +
                               std::string(split_name(it->second)) + " and " + std::string(split_name(r.split)));
        }
    }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    os << "subject_id,scan_id,split,volume_path";
    for (const auto& n : m.names) os << ',' << n;
    os << '\n';
    for (const auto& r : m.rows) {
        os << r.subject_id << ',' << r.scan_id << ',' << split_name(r.split) << ',' << r.volume_path;
        for (auto v : r.targets) os << ',' << csv::format_double(v);
        os << '\n';
    }
    if (!os) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

auto read_manifest(const std::filesystem::path& path) -> Manifest {
    const auto table = csv::read(path);
    const std::array<std::string, 4> fixed{"subject_id", "scan_id", "split", "volume_path"};
    if (table.header.size() <= fixed.size() || !std::equal(fixed.begin(), fixed.end(), table.header.begin())) {
        throw PhantomError("'" + path.string() + "' does not start with subject_id,scan_id,split,volume_path");
    }
    Manifest m;
    m.base_dir = path.parent_path();
    m.names.assign(table.header.begin() + 4, table.header.end());
    for (const auto& n : m.names) {
        (void)kind_of_column(n);
    }
    for (const auto& row : table.rows) {
        ManifestRow r;
        r.subject_id = std::stoull(row[0]);
        r.scan_id = static_cast<std::uint32_t>(std::stoul(row[1]));
        r.split = parse_split(row[2]);
        r.volume_path = row[3];
        for (std::size_t i = 4; i < row.size(); ++i) {
            r.targets.push_back(std::stod(row[i]));
        }
        m.rows.push_back(std::move(r));
    }
    check_disjoint(m);
    return m;
}

auto fit_scaler(const Manifest& m) -> Scaler {
    std::vector<std::vector<double>> rows;
    for (const auto& r : m.rows) {
        if (r.split == Split::Train) rows.push_back(r.targets);
    }
    return Scaler::fit(m.names, rows);
}

auto generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir) -> Manifest {
    if (cfg.scans_min < 1 || cfg.scans_max < cfg.scans_min) {
        throw PhantomError("scans per subject must satisfy 1 <= min <= max");
    }
    if (!(cfg.scan_jitter >= 0.0 && cfg.scan_jitter < 0.01)) {
        throw PhantomError("scan jitter must lie in [0, 0.01)");
    }
    std::vector<std::uint64_t> ids(cfg.subjects);
    std::iota(ids.begin(), ids.end(), 0);
    const auto splits = split_subjects(ids, cfg.ratios, stream_seed(cfg.seed, ~0ULL, 0));

    std::filesystem::create_directories(out_dir / "volumes");
    Manifest m;
    m.base_dir = out_dir;
    m.names = measurement_names();
    for (auto subject : ids) {
        std::mt19937_64 rng(stream_seed(cfg.seed, subject, 0));
        const auto base = sample_params(cfg.ranges, cfg.dims, cfg.supersample, rng);
        const int scans = std::uniform_int_distribution<int>(cfg.scans_min, cfg.scans_max)(rng);
        for (int scan = 0; scan < scans; ++scan) {
            std::mt19937_64 scan_rng(stream_seed(cfg.seed, subject, static_cast<std::uint64_t>(scan) + 1));
            const auto params = jitter_params(base, cfg.scan_jitter, scan_rng);
            const auto ph = generate_phantom(params);
            ManifestRow row;
            row.subject_id = subject;
            row.scan_id = static_cast<std::uint32_t>(scan);
            row.split = splits.at(subject);
            row.volume_path = "volumes/s" + std::to_string(subject) + "_" + std::to_string(scan) + ".mvol";
            for (const auto& t : ph.targets) row.targets.push_back(t.value);
            save_volume(out_dir / row.volume_path, ph.volume);
            m.rows.push_back(std::move(row));
        }
    }
    write_manifest(out_dir / "manifest.csv", m);
    std::ofstream(out_dir / "metadata.json") << dataset_metadata(cfg, m).dump(2) << '\n';
    return m;
}

auto dataset_metadata(const DatasetConfig& cfg, const Manifest& m) -> nlohmann::json {
    const auto& r = cfg.ranges;
    nlohmann::json measurements = nlohmann::json::array();
    for (const auto& n : m.names) {
        const auto k = kind_of_column(n);
        measurements.push_back({{"name", n}, {"kind", kind_name(k)}, {"unit", kind_unit(k)}});
    }
    std::map<std::string, std::size_t> scans, subjects;
    std::set<std::uint64_t> seen;
    for (const auto& row : m.rows) {
        ++scans[std::string(split_name(row.split))];
        if (seen.insert(row.subject_id).second) ++subjects[std::string(split_name(row.split))];
    }
    return {
        {"seed", cfg.seed},
        {"subjects", cfg.subjects},
        {"dims", cfg.dims},
        {"voxel_size_mm", 1.0},
        {"scans_per_subject", {cfg.scans_min, cfg.scans_max}},
        {"scan_jitter", cfg.scan_jitter},
        {"supersample", cfg.supersample},
        {"M", m.names.size()},
        {"measurements", measurements},
        {"split_ratios", {{"train", cfg.ratios.train}, {"validation", cfg.ratios.validation}, {"test", cfg.ratios.test}}},
        {"split_subjects", subjects},
        {"split_scans", scans},
        {"param_ranges",
         {{"r_mid_mm", {r.r_mid_lo, r.r_mid_hi}},
          {"thickness_mm", {r.thickness_lo, r.thickness_hi}},
          {"thickness_mult", {r.thickness_mult_lo, r.thickness_mult_hi}},
          {"radius_mult", {r.radius_mult_lo, r.radius_mult_hi}},
          {"blob_distance_mm", {r.blob_distance_lo, r.blob_distance_hi}},
          {"blob_radius_mm", {r.blob_radius_lo, r.blob_radius_hi}},
          {"center_jitter_mm", r.center_jitter},
          {"shell_intensity", r.shell_intensity},
          {"blob_intensity", r.blob_intensity},
          {"length_scale", length_scale(cfg.dims)}}},
    };
}

}  // namespace morphoreg::phantom
