#pragma once

#include "morphoreg/tensor/tensor.hpp"

#include <vector>

// Differentiable ops. Each op records itself on the tape of its operands when
// any operand is on a tape; otherwise it is a plain forward computation.
// Inner-loop accumulation is carried out in double for both element types.
namespace morphoreg::tensor {

// input [N,C,D,H,W], kernel [O,C,k,k,k], bias [O] -> [N,O,D',H',W'] with zero padding.
template <typename T>
auto conv3d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
            std::size_t stride, std::size_t padding) -> BasicTensor<T>;

// Max over k^3 windows. Backward routes each window's gradient to its first argmax.
template <typename T>
auto maxpool3d(const BasicTensor<T>& input, std::size_t k, std::size_t stride) -> BasicTensor<T>;

// input [N,F], weight [F,G], bias [G] -> [N,G].
template <typename T>
auto linear(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias)
    -> BasicTensor<T>;

template <typename T>
auto relu(const BasicTensor<T>& input) -> BasicTensor<T>;

template <typename T>
auto add(const BasicTensor<T>& a, const BasicTensor<T>& b) -> BasicTensor<T>;

template <typename T>
auto softmax(const BasicTensor<T>& input, std::size_t axis) -> BasicTensor<T>;

// Mean over spatial axes: [N,C,D,H,W] -> [N,C].
template <typename T>
auto global_avg_pool(const BasicTensor<T>& input) -> BasicTensor<T>;

// Stacks equally shaped tensors along a new leading axis.
template <typename T>
auto stack(const std::vector<BasicTensor<T>>& parts) -> BasicTensor<T>;

// weights [H,M], heads [H,N,M] -> out[n,m] = sum_h weights[h,m] * heads[h,n,m].
template <typename T>
auto mix_heads(const BasicTensor<T>& weights, const BasicTensor<T>& heads) -> BasicTensor<T>;

// (1/numel) * sum (pred - target)^2 as a scalar tensor of shape [1].
template <typename T>
auto mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) -> BasicTensor<T>;

}  // namespace morphoreg::tensor
