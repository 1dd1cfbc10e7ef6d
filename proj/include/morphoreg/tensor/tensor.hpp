#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace morphoreg::tensor {

using Shape = std::vector<std::size_t>;
using NodeId = std::uint32_t;

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline auto numel(const Shape& shape) -> std::size_t {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

auto to_string(const Shape& shape) -> std::string;

template <typename T>
class BasicTape;

// Dense row-major array. Values are immutable once constructed; a tensor that
// was produced by an op on a tape carries the tape and its node id.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    BasicTensor(Shape shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::make_shared<const std::vector<T>>(std::move(values))) {
        for (auto extent : shape_) {
            if (extent == 0) {
                throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
            }
        }
        if (numel(shape_) != data_->size()) {
            throw ShapeError("tensor of shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                             " values, got " + std::to_string(data_->size()));
        }
    }

    static auto zeros(Shape shape) -> BasicTensor {
        auto n = numel(shape);
        return BasicTensor(std::move(shape), std::vector<T>(n, T{0}));
    }

    static auto full(Shape shape, T value) -> BasicTensor {
        auto n = numel(shape);
        return BasicTensor(std::move(shape), std::vector<T>(n, value));
    }

    [[nodiscard]] auto shape() const -> const Shape& { return shape_; }
    [[nodiscard]] auto dim(std::size_t axis) const -> std::size_t { return shape_.at(axis); }
    [[nodiscard]] auto rank() const -> std::size_t { return shape_.size(); }
    [[nodiscard]] auto size() const -> std::size_t { return data_ ? data_->size() : 0; }
    [[nodiscard]] auto empty() const -> bool { return size() == 0; }

    [[nodiscard]] auto data() const -> std::span<const T> {
        return data_ ? std::span<const T>(*data_) : std::span<const T>{};
    }
    [[nodiscard]] auto values() const -> const std::vector<T>& { return *data_; }
    // Shares the value buffer; used by ops that must keep forward values alive for backward.
    [[nodiscard]] auto buffer() const -> std::shared_ptr<const std::vector<T>> { return data_; }
    [[nodiscard]] auto operator[](std::size_t i) const -> T { return (*data_)[i]; }
    [[nodiscard]] auto item() const -> T {
        if (size() != 1) {
            throw ShapeError("item() on tensor of shape " + to_string(shape_));
        }
        return (*data_)[0];
    }

    [[nodiscard]] auto node() const -> NodeId { return node_; }
    [[nodiscard]] auto on_tape() const -> bool { return tape_ != nullptr; }
    [[nodiscard]] auto tape() const -> BasicTape<T>* { return tape_; }

    // Same values, no tape attachment.
    [[nodiscard]] auto detached() const -> BasicTensor {
        BasicTensor out;
        out.shape_ = shape_;
        out.data_ = data_;
        return out;
    }

    // Shares values under a new shape with the same element count. Stays on the tape.
    [[nodiscard]] auto reshaped(Shape shape) const -> BasicTensor;

private:
    friend class BasicTape<T>;

    Shape shape_;
    std::shared_ptr<const std::vector<T>> data_;
    BasicTape<T>* tape_ = nullptr;
    NodeId node_ = kNoNode;
};

// Per-node gradient buffers produced by a backward pass.
template <typename T>
class BasicGradients {
public:
    BasicGradients() = default;
    explicit BasicGradients(std::vector<std::vector<T>> grads) : grads_(std::move(grads)) {}

    // Gradient with respect to `t`; all zeros if `t` was not reached from the loss.
    [[nodiscard]] auto of(const BasicTensor<T>& t) const -> std::vector<T> {
        if (t.node() != kNoNode && t.node() < grads_.size() && !grads_[t.node()].empty()) {
            return grads_[t.node()];
        }
        return std::vector<T>(t.size(), T{0});
    }

    [[nodiscard]] auto reached(const BasicTensor<T>& t) const -> bool {
        return t.node() != kNoNode && t.node() < grads_.size() && !grads_[t.node()].empty();
    }

private:
    std::vector<std::vector<T>> grads_;
};

// Records ops in execution order. Backward walks the recording in strict reverse.
template <typename T>
class BasicTape {
public:
    // Receives the output gradient and one accumulation buffer per recorded input
    // (nullptr for inputs that are off-tape). Implementations must add, not assign.
    using BackwardFn = std::function<void(std::span<const T> grad_out, std::span<std::vector<T>* const> grad_in)>;

    BasicTape() = default;
    BasicTape(const BasicTape&) = delete;
    auto operator=(const BasicTape&) -> BasicTape& = delete;

    // Registers `value` as a differentiable leaf (parameter or input of interest).
    auto leaf(const BasicTensor<T>& value) -> BasicTensor<T> {
        if (value.on_tape()) {
            throw std::logic_error("tensor is already recorded on a tape");
        }
        return attach(value.detached(), {}, nullptr);
    }

    // Records an op result. `inputs` are the op's operands in order; the backward
    // function receives gradient slots in the same order.
    auto record(Shape shape, std::vector<T> values, std::vector<const BasicTensor<T>*> inputs, BackwardFn backward)
        -> BasicTensor<T> {
        std::vector<NodeId> ids;
        ids.reserve(inputs.size());
        for (const auto* in : inputs) {
            if (in->on_tape() && in->tape() != this) {
                throw std::logic_error("operands belong to different tapes");
            }
            ids.push_back(in->on_tape() ? in->node() : kNoNode);
        }
        return attach(BasicTensor<T>(std::move(shape), std::move(values)), std::move(ids), std::move(backward));
    }

    [[nodiscard]] auto size() const -> std::size_t { return nodes_.size(); }

    auto backward(const BasicTensor<T>& loss) const -> BasicGradients<T> {
        if (loss.size() != 1) {
            throw ShapeError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
        }
        if (loss.tape() != this) {
            throw std::logic_error("loss is not recorded on this tape");
        }
        std::vector<std::vector<T>> grads(nodes_.size());
        grads[loss.node()] = std::vector<T>{T{1}};
        std::vector<std::vector<T>*> slots;
        for (std::size_t i = loss.node() + 1; i-- > 0;) {
            const auto& node = nodes_[i];
            if (grads[i].empty() || !node.backward) {
                continue;
            }
            slots.assign(node.inputs.size(), nullptr);
            for (std::size_t j = 0; j < node.inputs.size(); ++j) {
                auto id = node.inputs[j];
                if (id == kNoNode) {
                    continue;
                }
                if (grads[id].empty()) {
                    grads[id].assign(nodes_[id].size, T{0});
                }
                slots[j] = &grads[id];
            }
            node.backward(grads[i], slots);
        }
        return BasicGradients<T>(std::move(grads));
    }

private:
    friend class BasicTensor<T>;

    struct Node {
        std::vector<NodeId> inputs;
        BackwardFn backward;
        std::size_t size = 0;
    };

    auto attach(BasicTensor<T> t, std::vector<NodeId> inputs, BackwardFn backward) -> BasicTensor<T> {
        if (nodes_.size() >= kNoNode) {
            throw std::length_error("tape node limit reached");
        }
        nodes_.push_back(Node{std::move(inputs), std::move(backward), t.size()});
        t.tape_ = this;
        t.node_ = static_cast<NodeId>(nodes_.size() - 1);
        return t;
    }

    std::vector<Node> nodes_;
};

template <typename T>
auto BasicTensor<T>::reshaped(Shape shape) const -> BasicTensor {
    if (numel(shape) != size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    if (!on_tape()) {
        BasicTensor out = *this;
        out.shape_ = std::move(shape);
        return out;
    }
    auto in = *this;
    return tape_->record(std::move(shape), *data_, {&in},
                         [](std::span<const T> g, std::span<std::vector<T>* const> gi) {
                             if (gi[0] != nullptr) {
                                 for (std::size_t i = 0; i < g.size(); ++i) {
                                     (*gi[0])[i] += g[i];
                                 }
                             }
                         });
}

using Tensor = BasicTensor<float>;
using Tape = BasicTape<float>;
using Gradients = BasicGradients<float>;

using Tensor64 = BasicTensor<double>;
using Tape64 = BasicTape<double>;
using Gradients64 = BasicGradients<double>;

}  // namespace morphoreg::tensor
