#pragma once

#include "morphoreg/cli/config.hpp"
#include "morphoreg/metrics/report.hpp"
#include "morphoreg/nn/checkpoint.hpp"
#include "morphoreg/optim/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace morphoreg::cli {

namespace fs = std::filesystem;

inline constexpr const char* kResolvedConfig = "resolved_config.json";
inline constexpr const char* kTrainLog = "train_log.csv";

// Output directories that exist and are not empty need --force.
void prepare_out_dir(const fs::path& dir, bool force);

// Resolves "out" from the config, which the --out flag has already overridden.
[[nodiscard]] auto out_dir_of(const RunConfig& config) -> fs::path;

auto cmd_gen_data(const RunConfig& config, bool force) -> phantom::Manifest;

struct TrainArtifacts {
    fs::path dir;
    optim::TrainResult result;
    metrics::EvaluationReport validation;
    metrics::EvaluationReport test;
    std::string checksum;  // of the SWA-final parameters
};

// Writes resolved_config.json, train_log.csv, checkpoints/<tag>.ckpt, report_validation.csv,
// report_test.csv and summary.json for the SWA-final model.
auto cmd_train(const RunConfig& config, bool force, std::ostream* progress = nullptr) -> TrainArtifacts;

struct EvalOptions {
    fs::path checkpoint;
    fs::path manifest;
    phantom::Split split = phantom::Split::Test;
    fs::path out;  // defaults to the checkpoint's directory
    std::optional<fs::path> compare;
    std::size_t batch_size = 6;
    bool force = false;
};

struct EvalOutput {
    metrics::EvaluationReport report;
    nlohmann::json summary;
    fs::path report_csv;
};

auto cmd_eval(const EvalOptions& options) -> EvalOutput;

// Table for one or more report CSVs; labels default to the file stems.
[[nodiscard]] auto cmd_report(const std::vector<fs::path>& reports, std::vector<std::string> labels, bool markdown)
    -> std::string;

// Checkpoint carrying what evaluation needs: measurement names, scaler and run config.
void save_run_checkpoint(const fs::path& path, const nn::ModelState& model, const phantom::Scaler& scaler,
                         const std::string& tag, const nlohmann::json& config);

// FNV-1a over the raw parameter bytes, as 16 hex digits.
[[nodiscard]] auto parameter_checksum(const nn::ModelState& model) -> std::string;

}  // namespace morphoreg::cli
