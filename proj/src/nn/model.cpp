#include "morphoreg/nn/model.hpp"

#include "morphoreg/tensor/ops.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace morphoreg::nn {

namespace ops = morphoreg::tensor;

ModelState::ModelState(NetworkSpec spec, std::vector<Parameter> params)
    : spec_(std::move(spec)), params_(std::move(params)) {}

auto ModelState::index_of(const std::string& name) const -> std::size_t {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) {
            return i;
        }
    }
    throw std::out_of_range("no parameter named '" + name + "'");
}

auto ModelState::param(const std::string& name) const -> const Tensor& { return params_[index_of(name)].value; }

auto ModelState::parameter_count() const -> std::size_t {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.value.size();
    }
    return n;
}

void ModelState::set(std::size_t index, Tensor value) {
    auto& slot = params_.at(index);
    if (value.shape() != slot.value.shape()) {
        throw tensor::ShapeError("parameter '" + slot.name + "' has shape " + tensor::to_string(slot.value.shape()) +
                                 ", got " + tensor::to_string(value.shape()));
    }
    slot.value = value.detached();
}

void ModelState::set(const std::string& name, Tensor value) { set(index_of(name), std::move(value)); }

auto ModelState::flatten() const -> std::vector<float> {
    std::vector<float> flat;
    flat.reserve(parameter_count());
    for (const auto& p : params_) {
        flat.insert(flat.end(), p.value.data().begin(), p.value.data().end());
    }
    return flat;
}

void ModelState::unflatten(std::span<const float> flat) {
    if (flat.size() != parameter_count()) {
        throw tensor::ShapeError("flat parameter vector has " + std::to_string(flat.size()) + " values, model has " +
                                 std::to_string(parameter_count()));
    }
    std::size_t offset = 0;
    for (auto& p : params_) {
        const auto n = p.value.size();
        p.value = Tensor(p.value.shape(), std::vector<float>(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                                                             flat.begin() + static_cast<std::ptrdiff_t>(offset + n)));
        offset += n;
    }
}

namespace {

auto stem_name(std::size_t i, const char* what) -> std::string {
    return "stem." + std::to_string(i) + "." + what;
}

auto block_name(std::size_t s, std::size_t b, const char* what) -> std::string {
    return "stage" + std::to_string(s) + ".block" + std::to_string(b) + "." + what;
}

auto head_name(std::size_t h, const char* what) -> std::string { return "head" + std::to_string(h) + "." + what; }

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    auto normal(tensor::Shape shape, double stddev) -> Tensor {
        std::normal_distribution<double> dist(0.0, stddev);
        std::vector<float> v(tensor::numel(shape));
        for (auto& x : v) {
            x = static_cast<float>(dist(rng_));
        }
        return Tensor(std::move(shape), std::move(v));
    }

    // He fan-in scaling for ReLU networks.
    auto conv(std::size_t out, std::size_t in, std::size_t k) -> Tensor {
        const auto fan_in = static_cast<double>(in * k * k * k);
        return normal({out, in, k, k, k}, std::sqrt(2.0 / fan_in));
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace

auto build_model(const NetworkSpec& spec, std::uint64_t seed) -> ModelState {
    const auto shapes = validate(spec);
    Initializer init(seed);
    std::vector<Parameter> params;

    for (std::size_t i = 0; i < spec.stem.size(); ++i) {
        if (const auto* c = std::get_if<Conv3D>(&spec.stem[i])) {
            params.push_back({stem_name(i, "kernel"), init.conv(c->out, c->in, c->k)});
            params.push_back({stem_name(i, "bias"), Tensor::zeros({c->out})});
        }
    }

    std::size_t channels = spec.in_channels;
    for (const auto& layer : spec.stem) {
        if (const auto* c = std::get_if<Conv3D>(&layer)) {
            channels = c->out;
        }
    }
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
        for (std::size_t b = 0; b < spec.stages[s].blocks.size(); ++b) {
            const auto& block = spec.stages[s].blocks[b];
            const auto out = block.channels;
            params.push_back({block_name(s, b, "conv1.kernel"), init.conv(out, channels, 3)});
            params.push_back({block_name(s, b, "conv1.bias"), Tensor::zeros({out})});
            params.push_back({block_name(s, b, "conv2.kernel"), init.conv(out, out, 3)});
            params.push_back({block_name(s, b, "conv2.bias"), Tensor::zeros({out})});
            if (out != channels || block.stride != 1) {
                params.push_back({block_name(s, b, "proj.kernel"), init.conv(out, channels, 1)});
                params.push_back({block_name(s, b, "proj.bias"), Tensor::zeros({out})});
            }
            channels = out;
        }
    }

    const auto M = spec.measurements;
    for (std::size_t h = 0; h < spec.head_count(); ++h) {
        const auto in = shapes[spec.head_stages[h]].channels;
        params.push_back({head_name(h, "weight"), init.normal({in, M}, std::sqrt(1.0 / static_cast<double>(in)))});
        params.push_back({head_name(h, "bias"), Tensor::zeros({M})});
    }
    params.push_back({"alpha", Tensor::zeros({spec.head_count(), M})});
    return ModelState(spec, std::move(params));
}

auto res_block_forward(const Tensor& x, const ResBlockParams& block) -> Tensor {
    const auto in_channels = block.conv1_kernel.dim(1);
    if (x.rank() != 5 || x.dim(1) != in_channels) {
        throw tensor::ShapeError("residual block expects " + std::to_string(in_channels) +
                                 " input channels, got input " + tensor::to_string(x.shape()));
    }
    auto f = ops::conv3d(x, block.conv1_kernel, block.conv1_bias, block.stride, 1);
    f = ops::relu(f);
    f = ops::conv3d(f, block.conv2_kernel, block.conv2_bias, 1, 1);
    const auto shortcut =
        block.has_projection() ? ops::conv3d(x, block.proj_kernel, block.proj_bias, block.stride, 0) : x;
    return ops::relu(ops::add(f, shortcut));
}

auto bind(const ModelState& model, Tape& tape) -> std::vector<Tensor> {
    std::vector<Tensor> bound;
    bound.reserve(model.params().size());
    for (const auto& p : model.params()) {
        bound.push_back(tape.leaf(p.value));
    }
    return bound;
}

auto forward(const ModelState& model, std::span<const Tensor> params, const Tensor& batch) -> ForwardOutput {
    const auto& spec = model.spec();
    if (params.size() != model.params().size()) {
        throw std::invalid_argument("forward needs " + std::to_string(model.params().size()) + " parameters, got " +
                                    std::to_string(params.size()));
    }
    if (batch.rank() != 5 || batch.dim(1) != spec.in_channels || batch.dim(2) != spec.input_dims[0] ||
        batch.dim(3) != spec.input_dims[1] || batch.dim(4) != spec.input_dims[2]) {
        throw tensor::ShapeError("batch " + tensor::to_string(batch.shape()) + " does not match network input [N," +
                                 std::to_string(spec.in_channels) + "," + std::to_string(spec.input_dims[0]) + "," +
                                 std::to_string(spec.input_dims[1]) + "," + std::to_string(spec.input_dims[2]) + "]");
    }
    auto p = [&](const std::string& name) -> const Tensor& { return params[model.index_of(name)]; };

    Tensor x = batch;
    for (std::size_t i = 0; i < spec.stem.size(); ++i) {
        const auto& layer = spec.stem[i];
        if (const auto* c = std::get_if<Conv3D>(&layer)) {
            x = ops::conv3d(x, p(stem_name(i, "kernel")), p(stem_name(i, "bias")), c->stride, c->k / 2);
        } else if (const auto* m = std::get_if<MaxPool3D>(&layer)) {
            x = ops::maxpool3d(x, m->k, m->stride);
        } else if (std::holds_alternative<ReLU>(layer)) {
            x = ops::relu(x);
        }
    }

    std::vector<Tensor> taps(spec.stages.size());
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
        for (std::size_t b = 0; b < spec.stages[s].blocks.size(); ++b) {
            ResBlockParams block;
            block.conv1_kernel = p(block_name(s, b, "conv1.kernel"));
            block.conv1_bias = p(block_name(s, b, "conv1.bias"));
            block.conv2_kernel = p(block_name(s, b, "conv2.kernel"));
            block.conv2_bias = p(block_name(s, b, "conv2.bias"));
            block.stride = spec.stages[s].blocks[b].stride;
            const auto proj = block_name(s, b, "proj.kernel");
            if (std::ranges::any_of(model.params(), [&](const Parameter& q) { return q.name == proj; })) {
                block.proj_kernel = p(proj);
                block.proj_bias = p(block_name(s, b, "proj.bias"));
            }
            x = res_block_forward(x, block);
        }
        taps[s] = x;
    }

    std::vector<Tensor> heads;
    for (std::size_t h = 0; h < spec.head_count(); ++h) {
        const auto pooled = ops::global_avg_pool(taps[spec.head_stages[h]]);
        heads.push_back(ops::linear(pooled, p(head_name(h, "weight")), p(head_name(h, "bias"))));
    }
    ForwardOutput out;
    out.per_head = ops::stack(heads);
    out.mixing = ops::softmax(p("alpha"), 0);
    out.combined = ops::mix_heads(out.mixing, out.per_head);
    return out;
}

auto forward(const ModelState& model, const Tensor& batch) -> ForwardOutput {
    std::vector<Tensor> params;
    params.reserve(model.params().size());
    for (const auto& q : model.params()) {
        params.push_back(q.value);
    }
    return forward(model, params, batch);
}

}  // namespace morphoreg::nn
