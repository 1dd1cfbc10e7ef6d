#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace morphoreg::nn {

// Layer grammar: Conv3D[in, out, k, s], MaxPool3D[k, s], FullyConnected[in, out].
// Convolutions zero-pad by k/2.
struct Conv3D {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t k = 3;
    std::size_t stride = 1;
};

struct MaxPool3D {
    std::size_t k = 2;
    std::size_t stride = 2;
};

struct FullyConnected {
    std::size_t in = 0;
    std::size_t out = 0;
};

// conv3x3(stride) -> relu -> conv3x3 added to an identity or 1^3 projection shortcut, then relu.
struct ResBlock {
    std::size_t channels = 0;
    std::size_t stride = 1;
};

struct GlobalAvgPool {};
struct ReLU {};

using LayerSpec = std::variant<Conv3D, MaxPool3D, FullyConnected, ResBlock, GlobalAvgPool, ReLU>;

struct StageSpec {
    std::vector<ResBlock> blocks;
};

struct NetworkSpec {
    std::size_t in_channels = 1;
    std::array<std::size_t, 3> input_dims{32, 32, 32};
    std::vector<LayerSpec> stem;
    std::vector<StageSpec> stages;
    // Stage indices whose outputs feed a GlobalAvgPool -> FullyConnected[C, M] head.
    std::vector<std::size_t> head_stages;
    std::size_t measurements = 12;

    [[nodiscard]] auto head_count() const -> std::size_t { return head_stages.size(); }
};

class SpecError : public std::invalid_argument {
public:
    SpecError(const std::string& what, std::ptrdiff_t layer_index)
        : std::invalid_argument(what), layer_index_(layer_index) {}

    // Flat index over stem layers followed by stage blocks; -1 when not layer specific.
    [[nodiscard]] auto layer_index() const -> std::ptrdiff_t { return layer_index_; }

private:
    std::ptrdiff_t layer_index_;
};

// Spatial and channel extents after each stage, as computed by validate().
struct StageShape {
    std::size_t channels = 0;
    std::array<std::size_t, 3> dims{};
};

// Checks channel chaining and that no stage collapses below one voxel.
auto validate(const NetworkSpec& spec) -> std::vector<StageShape>;

// Stem Conv3D[1,16,3,1] + ReLU + MaxPool3D[2,2]; stages of one ResBlock with 16/32/64/128
// channels, stride 2 from the second stage on. `heads` = 4 taps every stage, 1 taps the last.
auto desk_spec(std::size_t measurements = 12, std::size_t heads = 4, std::size_t edge = 32) -> NetworkSpec;

auto to_json(const NetworkSpec& spec) -> nlohmann::json;
auto spec_from_json(const nlohmann::json& j) -> NetworkSpec;

}  // namespace morphoreg::nn
