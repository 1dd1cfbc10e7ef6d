#pragma once

#include "morphoreg/metrics/report.hpp"
#include "morphoreg/nn/model.hpp"
#include "morphoreg/optim/optim.hpp"
#include "morphoreg/phantom/augment.hpp"
#include "morphoreg/phantom/dataset.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace morphoreg::optim {

struct Sample {
    std::uint64_t subject = 0;
    std::uint32_t scan = 0;
    phantom::Volume3D volume;
    std::vector<double> target;  // physical units
    std::vector<float> scaled;   // after the training-split scaler
};

struct TrainingData {
    std::vector<std::string> names;
    std::vector<MeasurementKind> kinds;
    phantom::Scaler scaler;
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;

    [[nodiscard]] auto split(phantom::Split s) const -> const std::vector<Sample>&;
};

// Loads every volume of a manifest and fits the scaler on its training rows, unless a
// stored scaler is supplied.
[[nodiscard]] auto load_training_data(const phantom::Manifest& manifest, const phantom::Scaler* stored = nullptr)
    -> TrainingData;

// Model selection needs an ICC, which needs at least three scans. Splits smaller than
// that fall back to the training samples.
inline constexpr std::size_t kMinIccRows = 3;
[[nodiscard]] auto selection_samples(const TrainingData& data) -> const std::vector<Sample>&;

struct TrainConfig {
    std::size_t batch_size = 6;
    AdamConfig adam;
    std::size_t main_epochs = 60;
    std::size_t eval_interval = 1;
    std::uint32_t swa_cycles = 5;
    std::size_t swa_epochs_per_cycle = 4;
    double swa_lr_max = 1e-2;
    double swa_lr_min = 1e-6;
    phantom::AugmentConfig augment;
    std::uint64_t seed = 1;
    // Also continue plain Adam from the end of the main phase for as many steps as the
    // SWA phase takes.
    bool adam_only_branch = false;
};

struct LogRow {
    std::string phase;  // adam, swa, adam_only
    std::size_t epoch = 0;
    std::uint64_t step = 0;  // within the phase
    double lr = 0.0;
    double train_mse = 0.0;
    std::optional<double> val_mean_icc;
    double wall_time_s = 0.0;
};

inline constexpr const char* kLogHeader = "phase,epoch,step,lr,train_mse,val_mean_icc,wall_time_s";
[[nodiscard]] auto format_log_row(const LogRow& row) -> std::string;

struct TrainHooks {
    // Called with tags best_adam, swa_snapshot_<c>, swa_final, adam_only_final, last_good.
    std::function<void(const std::string& tag, const nn::ModelState& model)> checkpoint;
    std::function<void(const LogRow& row)> log;
};

struct TrainResult {
    nn::ModelState best_adam;
    int epoch_of_best = -1;
    double best_val_icc = 0.0;
    nn::ModelState swa_final;
    std::vector<std::vector<float>> swa_snapshots;
    std::optional<nn::ModelState> adam_only_final;
    CyclicSchedule schedule;
    std::vector<std::string> trace;
    std::vector<LogRow> log;
};

// Adam with per-interval validation selection, restore of the best weights, then
// swa_cycles cycles of SGD on the cyclic schedule with a snapshot at every cycle minimum,
// then the snapshot average. Throws NonFiniteError (after a last_good checkpoint) if the
// loss or a gradient stops being finite.
auto train(nn::ModelState model, const TrainingData& data, const TrainConfig& config, const TrainHooks& hooks = {})
    -> TrainResult;

// Scaled predictions, one row per sample.
[[nodiscard]] auto predict(const nn::ModelState& model, const std::vector<Sample>& samples, std::size_t batch_size)
    -> std::vector<std::vector<float>>;

// Mean squared error in scaled units.
[[nodiscard]] auto scaled_mse(const std::vector<std::vector<float>>& predictions, const std::vector<Sample>& samples)
    -> double;

// Per-measurement ICC(2,1) of de-normalised predictions against physical targets.
[[nodiscard]] auto evaluate(const nn::ModelState& model, const TrainingData& data, const std::vector<Sample>& samples,
                            std::size_t batch_size) -> metrics::EvaluationReport;
[[nodiscard]] auto report_from_predictions(const TrainingData& data, const std::vector<Sample>& samples,
                                           const std::vector<std::vector<float>>& scaled_predictions)
    -> metrics::EvaluationReport;

}  // namespace morphoreg::optim
