#pragma once

#include "morphoreg/nn/spec.hpp"
#include "morphoreg/tensor/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morphoreg::nn {

using tensor::Tape;
using tensor::Tensor;

struct Parameter {
    std::string name;
    Tensor value;
};

// All learnable parameters of a built network, in a fixed order. The order and
// names are a pure function of the NetworkSpec.
class ModelState {
public:
    ModelState() = default;
    ModelState(NetworkSpec spec, std::vector<Parameter> params);

    [[nodiscard]] auto spec() const -> const NetworkSpec& { return spec_; }
    [[nodiscard]] auto params() const -> const std::vector<Parameter>& { return params_; }
    [[nodiscard]] auto param(const std::string& name) const -> const Tensor&;
    [[nodiscard]] auto index_of(const std::string& name) const -> std::size_t;
    [[nodiscard]] auto parameter_count() const -> std::size_t;

    void set(std::size_t index, Tensor value);
    void set(const std::string& name, Tensor value);

    [[nodiscard]] auto flatten() const -> std::vector<float>;
    // Replaces every parameter from a flat vector produced by flatten() on a same-spec model.
    void unflatten(std::span<const float> flat);

private:
    NetworkSpec spec_;
    std::vector<Parameter> params_;
};

// He-style fan-in initialisation for convolutions, LeCun-style for heads,
// zero biases and zero head logits. Deterministic in (spec, seed).
auto build_model(const NetworkSpec& spec, std::uint64_t seed) -> ModelState;

// Parameter tensors of one residual block. `proj_*` are empty for identity shortcuts.
struct ResBlockParams {
    Tensor conv1_kernel, conv1_bias;
    Tensor conv2_kernel, conv2_bias;
    Tensor proj_kernel, proj_bias;
    std::size_t stride = 1;

    [[nodiscard]] auto has_projection() const -> bool { return !proj_kernel.empty(); }
};

auto res_block_forward(const Tensor& x, const ResBlockParams& block) -> Tensor;

struct ForwardOutput {
    Tensor per_head;  // [H, N, M]
    Tensor combined;  // [N, M]
    Tensor mixing;    // softmax of the head logits over heads, [H, M]
};

// Parameters as tape leaves, parallel to ModelState::params().
auto bind(const ModelState& model, Tape& tape) -> std::vector<Tensor>;

// `params` must be parallel to model.params(); pass bound tensors to differentiate.
auto forward(const ModelState& model, std::span<const Tensor> params, const Tensor& batch) -> ForwardOutput;
auto forward(const ModelState& model, const Tensor& batch) -> ForwardOutput;

}  // namespace morphoreg::nn
