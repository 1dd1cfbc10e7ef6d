#include "morphoreg/optim/optim.hpp"

#include <cmath>

namespace morphoreg::optim {

namespace {

void check_grads(const std::vector<Parameter>& params, const Grads& grads) {
    if (grads.size() != params.size()) {
        throw std::invalid_argument("got " + std::to_string(grads.size()) + " gradients for " +
                                    std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i].value.size()) {
            throw std::invalid_argument("gradient for '" + params[i].name + "' has " +
                                        std::to_string(grads[i].size()) + " values, parameter has " +
                                        std::to_string(params[i].value.size()));
        }
        for (auto g : grads[i]) {
            if (!std::isfinite(g)) {
                throw NonFiniteError(params[i].name, "non-finite gradient for parameter '" + params[i].name +
                                                         "'; step rejected");
            }
        }
    }
}

template <typename Step>
void on_model(ModelState& model, Step step) {
    auto params = model.params();
    step(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        model.set(i, params[i].value);
    }
}

}  // namespace

void adam_step(AdamState& s, std::vector<Parameter>& params, const Grads& grads) {
    check_grads(params, grads);
    if (s.t == 0 && s.m.empty()) {
        for (const auto& p : params) {
            s.m.emplace_back(p.value.size(), 0.0);
            s.v.emplace_back(p.value.size(), 0.0);
        }
    }
    if (s.m.size() != params.size()) {
        throw std::invalid_argument("Adam state tracks " + std::to_string(s.m.size()) + " parameters, got " +
                                    std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (s.m[i].size() != params[i].value.size()) {
            throw std::invalid_argument("Adam moments for '" + params[i].name + "' do not match its shape");
        }
    }
    const auto& c = s.config;
    ++s.t;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].value.values();
        auto& m = s.m[i];
        auto& v = s.v[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j];
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
            const double mhat = m[j] / bc1, vhat = v[j] / bc2;
            w[j] = static_cast<float>(w[j] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
        }
        params[i].value = nn::Tensor(params[i].value.shape(), std::move(w));
    }
}

void adam_step(AdamState& state, ModelState& model, const Grads& grads) {
    on_model(model, [&](std::vector<Parameter>& p) { adam_step(state, p, grads); });
}

void sgd_step(double lr, std::vector<Parameter>& params, const Grads& grads) {
    check_grads(params, grads);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].value.values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] = static_cast<float>(w[j] - lr * grads[i][j]);
        }
        params[i].value = nn::Tensor(params[i].value.shape(), std::move(w));
    }
}

void sgd_step(double lr, ModelState& model, const Grads& grads) {
    on_model(model, [&](std::vector<Parameter>& p) { sgd_step(lr, p, grads); });
}

auto cyclic_lr(std::uint64_t step, const CyclicSchedule& s) -> double {
    if (s.cycle_len < 2) {
        throw std::invalid_argument("cyclic schedule needs cycle_len >= 2, got " + std::to_string(s.cycle_len));
    }
    const auto pos = static_cast<double>(step % s.cycle_len);
    return s.lr_max - (s.lr_max - s.lr_min) * pos / static_cast<double>(s.cycle_len - 1);
}

auto at_cycle_end(std::uint64_t step, const CyclicSchedule& s) -> bool {
    if (s.cycle_len < 2) {
        throw std::invalid_argument("cyclic schedule needs cycle_len >= 2, got " + std::to_string(s.cycle_len));
    }
    return step % s.cycle_len == s.cycle_len - 1;
}

void swa_absorb(SwaAccumulator& acc, std::span<const float> snapshot) {
    if (acc.count == 0) {
        acc.running_mean.assign(snapshot.begin(), snapshot.end());
        acc.count = 1;
        return;
    }
    if (snapshot.size() != acc.running_mean.size()) {
        throw std::invalid_argument("SWA snapshot has " + std::to_string(snapshot.size()) + " values, expected " +
                                    std::to_string(acc.running_mean.size()));
    }
    const auto k = static_cast<double>(acc.count);
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        acc.running_mean[i] = (acc.running_mean[i] * k + snapshot[i]) / (k + 1.0);
    }
    ++acc.count;
}

auto swa_mean(const SwaAccumulator& acc) -> std::vector<float> {
    return {acc.running_mean.begin(), acc.running_mean.end()};
}

auto select_best(SelectionState& state, int epoch, double mean_val_icc, const ModelState& params) -> bool {
    if (!std::isfinite(mean_val_icc)) {
        throw std::invalid_argument("validation mean ICC must be finite");
    }
    if (state.has_best() && !(mean_val_icc > state.best_mean_icc)) {
        return false;
    }
    state.best_mean_icc = mean_val_icc;
    state.best_params = params;
    state.epoch_of_best = epoch;
    return true;
}

}  // namespace morphoreg::optim
