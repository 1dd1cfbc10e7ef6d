#pragma once

#include "morphoreg/phantom/phantom.hpp"
#include "morphoreg/phantom/scaler.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace morphoreg::phantom {

enum class Split { Train, Validation, Test };

[[nodiscard]] auto split_name(Split s) -> std::string_view;
[[nodiscard]] auto parse_split(std::string_view text) -> Split;

struct SplitRatios {
    double train = 0.60;
    double validation = 0.15;
    double test = 0.25;
};

// Subject-wise assignment. Counts are rounded from the ratios, every split with a
// positive ratio gets at least one subject, and the test split takes the remainder.
[[nodiscard]] auto split_subjects(const std::vector<std::uint64_t>& subject_ids, const SplitRatios& ratios,
                                  std::uint64_t seed) -> std::map<std::uint64_t, Split>;

struct ManifestRow {
    std::uint64_t subject_id = 0;
    std::uint32_t scan_id = 0;
    Split split = Split::Train;
    std::string volume_path;  // relative to the manifest's directory
    std::vector<double> targets;
};

struct Manifest {
    std::vector<std::string> names;
    std::vector<ManifestRow> rows;
    std::filesystem::path base_dir;

    [[nodiscard]] auto volume_file(const ManifestRow& row) const -> std::filesystem::path {
        return base_dir / row.volume_path;
    }
    [[nodiscard]] auto rows_in(Split s) const -> std::vector<ManifestRow>;
    [[nodiscard]] auto kinds() const -> std::vector<MeasurementKind>;
};

// subject_id,scan_id,split,volume_path,<measurement columns>
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
// Validates column names and that each subject sits in exactly one split.
[[nodiscard]] auto read_manifest(const std::filesystem::path& path) -> Manifest;
void check_disjoint(const Manifest& manifest);

// Scaler over the training rows of a manifest; other splits never influence it.
[[nodiscard]] auto fit_scaler(const Manifest& manifest) -> Scaler;

struct DatasetConfig {
    std::size_t subjects = 120;
    Dims dims{32, 32, 32};
    int scans_min = 1;
    int scans_max = 3;
    double scan_jitter = 0.005;
    int supersample = 4;
    ParamRanges ranges;
    SplitRatios ratios;
    std::uint64_t seed = 1;
};

// Writes volumes/, manifest.csv and metadata.json under out_dir.
auto generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir) -> Manifest;

[[nodiscard]] auto dataset_metadata(const DatasetConfig& config, const Manifest& manifest) -> nlohmann::json;

}  // namespace morphoreg::phantom
