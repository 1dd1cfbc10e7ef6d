#pragma once

#include "morphoreg/nn/model.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoreg::optim {

using nn::ModelState;
using nn::Parameter;
using Grads = std::vector<std::vector<float>>;

// A gradient (or loss) contained NaN or infinity; the step was not applied.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(std::string parameter, const std::string& what)
        : std::runtime_error(what), parameter_(std::move(parameter)) {}
    [[nodiscard]] auto parameter() const -> const std::string& { return parameter_; }

private:
    std::string parameter_;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moments are sized on the first step and shape-checked on every later one.
struct AdamState {
    AdamConfig config;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t t = 0;
};

void adam_step(AdamState& state, std::vector<Parameter>& params, const Grads& grads);
void adam_step(AdamState& state, ModelState& model, const Grads& grads);

// Plain SGD, no momentum.
void sgd_step(double lr, std::vector<Parameter>& params, const Grads& grads);
void sgd_step(double lr, ModelState& model, const Grads& grads);

struct CyclicSchedule {
    double lr_max = 1e-2;
    double lr_min = 1e-6;
    std::uint64_t cycle_len = 4;
    std::uint32_t n_cycles = 5;
};

// lr_max - (lr_max - lr_min) * (step mod L) / (L - 1)
[[nodiscard]] auto cyclic_lr(std::uint64_t step, const CyclicSchedule& sched) -> double;
// True on the last step of a cycle, where the rate reaches lr_min.
[[nodiscard]] auto at_cycle_end(std::uint64_t step, const CyclicSchedule& sched) -> bool;

struct SwaAccumulator {
    std::vector<double> running_mean;
    std::uint64_t count = 0;
};

void swa_absorb(SwaAccumulator& acc, std::span<const float> snapshot);
[[nodiscard]] auto swa_mean(const SwaAccumulator& acc) -> std::vector<float>;

struct SelectionState {
    double best_mean_icc = -std::numeric_limits<double>::infinity();
    ModelState best_params;
    int epoch_of_best = -1;

    [[nodiscard]] auto has_best() const -> bool { return epoch_of_best >= 0; }
};

// Keeps the new parameters only when mean_val_icc is strictly greater.
auto select_best(SelectionState& state, int epoch, double mean_val_icc, const ModelState& params) -> bool;

}  // namespace morphoreg::optim
