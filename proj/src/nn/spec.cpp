#include "morphoreg/nn/spec.hpp"

#include <algorithm>
#include <set>

namespace morphoreg::nn {

namespace {

auto dims_string(const std::array<std::size_t, 3>& d) -> std::string {
    return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace

auto validate(const NetworkSpec& spec) -> std::vector<StageShape> {
    if (spec.in_channels == 0) {
        throw SpecError("input channel count must be positive", -1);
    }
    if (std::ranges::any_of(spec.input_dims, [](auto d) { return d == 0; })) {
        throw SpecError("input dims must be positive", -1);
    }
    if (spec.measurements == 0) {
        throw SpecError("measurement count must be positive", -1);
    }
    std::size_t channels = spec.in_channels;
    auto dims = spec.input_dims;
    std::ptrdiff_t index = 0;

    auto fail = [&](const std::string& what) -> void {
        throw SpecError("layer " + std::to_string(index) + ": " + what, index);
    };

    for (const auto& layer : spec.stem) {
        std::visit(Overloaded{
                       [&](const Conv3D& c) {
                           if (c.out == 0 || c.k == 0 || c.stride == 0) {
                               fail("Conv3D parameters must be positive");
                           }
                           if (c.in != channels) {
                               fail("Conv3D expects " + std::to_string(c.in) + " input channels but receives " +
                                    std::to_string(channels));
                           }
                           for (auto& d : dims) {
                               const auto pad = c.k / 2;
                               if (c.k > d + 2 * pad) {
                                   fail("Conv3D kernel " + std::to_string(c.k) + " exceeds input " + dims_string(dims));
                               }
                               d = (d + 2 * pad - c.k) / c.stride + 1;
                           }
                           channels = c.out;
                       },
                       [&](const MaxPool3D& p) {
                           if (p.k == 0 || p.stride == 0) {
                               fail("MaxPool3D parameters must be positive");
                           }
                           for (auto& d : dims) {
                               if (p.k > d) {
                                   fail("MaxPool3D window " + std::to_string(p.k) + " exceeds input " +
                                        dims_string(dims));
                               }
                               d = (d - p.k) / p.stride + 1;
                           }
                       },
                       [&](const ReLU&) {},
                       [&](const auto&) { fail("only Conv3D, MaxPool3D and ReLU are allowed in the stem"); },
                   },
                   layer);
        ++index;
    }

    if (spec.stages.empty()) {
        throw SpecError("network needs at least one residual stage", -1);
    }
    std::vector<StageShape> shapes;
    for (const auto& stage : spec.stages) {
        if (stage.blocks.empty()) {
            fail("residual stage without blocks");
        }
        for (const auto& block : stage.blocks) {
            if (block.channels == 0) {
                fail("ResBlock channels must be positive");
            }
            if (block.stride != 1 && block.stride != 2) {
                fail("ResBlock stride must be 1 or 2, got " + std::to_string(block.stride));
            }
            for (auto& d : dims) {
                d = (d - 1) / block.stride + 1;
            }
            channels = block.channels;
            ++index;
        }
        shapes.push_back({channels, dims});
    }

    if (spec.head_stages.empty()) {
        throw SpecError("network needs at least one regression head", -1);
    }
    std::set<std::size_t> seen;
    for (auto s : spec.head_stages) {
        if (s >= spec.stages.size()) {
            throw SpecError("head taps stage " + std::to_string(s) + " but only " +
                                std::to_string(spec.stages.size()) + " stages exist",
                            -1);
        }
        if (!seen.insert(s).second) {
            throw SpecError("stage " + std::to_string(s) + " tapped twice", -1);
        }
    }
    return shapes;
}

auto desk_spec(std::size_t measurements, std::size_t heads, std::size_t edge) -> NetworkSpec {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.input_dims = {edge, edge, edge};
    spec.stem = {Conv3D{1, 16, 3, 1}, ReLU{}, MaxPool3D{2, 2}};
    spec.stages = {
        StageSpec{{ResBlock{16, 1}}},
        StageSpec{{ResBlock{32, 2}}},
        StageSpec{{ResBlock{64, 2}}},
        StageSpec{{ResBlock{128, 2}}},
    };
    spec.measurements = measurements;
    if (heads == 0 || heads > spec.stages.size()) {
        throw SpecError("desk preset supports 1 to 4 heads, got " + std::to_string(heads), -1);
    }
    // Tap the deepest `heads` stages so a single head is the plain funnel regressor.
    for (std::size_t s = spec.stages.size() - heads; s < spec.stages.size(); ++s) {
        spec.head_stages.push_back(s);
    }
    return spec;
}

auto to_json(const NetworkSpec& spec) -> nlohmann::json {
    using nlohmann::json;
    json stem = json::array();
    for (const auto& layer : spec.stem) {
        std::visit(Overloaded{
                       [&](const Conv3D& c) {
                           stem.push_back({{"type", "Conv3D"}, {"in", c.in}, {"out", c.out}, {"k", c.k},
                                           {"stride", c.stride}});
                       },
                       [&](const MaxPool3D& p) {
                           stem.push_back({{"type", "MaxPool3D"}, {"k", p.k}, {"stride", p.stride}});
                       },
                       [&](const FullyConnected& f) {
                           stem.push_back({{"type", "FullyConnected"}, {"in", f.in}, {"out", f.out}});
                       },
                       [&](const ResBlock& r) {
                           stem.push_back({{"type", "ResBlock"}, {"channels", r.channels}, {"stride", r.stride}});
                       },
                       [&](const GlobalAvgPool&) { stem.push_back({{"type", "GlobalAvgPool"}}); },
                       [&](const ReLU&) { stem.push_back({{"type", "ReLU"}}); },
                   },
                   layer);
    }
    json stages = json::array();
    for (const auto& stage : spec.stages) {
        json blocks = json::array();
        for (const auto& b : stage.blocks) {
            blocks.push_back({{"channels", b.channels}, {"stride", b.stride}});
        }
        stages.push_back(blocks);
    }
    return {{"in_channels", spec.in_channels}, {"input_dims", spec.input_dims},
            {"stem", stem},
            {"stages", stages},
            {"head_stages", spec.head_stages},
            {"measurements", spec.measurements}};
}

auto spec_from_json(const nlohmann::json& j) -> NetworkSpec {
    NetworkSpec spec;
    spec.in_channels = j.at("in_channels").get<std::size_t>();
    spec.input_dims = j.at("input_dims").get<std::array<std::size_t, 3>>();
    for (const auto& l : j.at("stem")) {
        const auto type = l.at("type").get<std::string>();
        if (type == "Conv3D") {
            spec.stem.emplace_back(Conv3D{l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                                          l.at("k").get<std::size_t>(), l.at("stride").get<std::size_t>()});
        } else if (type == "MaxPool3D") {
            spec.stem.emplace_back(MaxPool3D{l.at("k").get<std::size_t>(), l.at("stride").get<std::size_t>()});
        } else if (type == "FullyConnected") {
            spec.stem.emplace_back(FullyConnected{l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>()});
        } else if (type == "ResBlock") {
            spec.stem.emplace_back(
                ResBlock{l.at("channels").get<std::size_t>(), l.at("stride").get<std::size_t>()});
        } else if (type == "GlobalAvgPool") {
            spec.stem.emplace_back(GlobalAvgPool{});
        } else if (type == "ReLU") {
            spec.stem.emplace_back(ReLU{});
        } else {
            throw SpecError("unknown layer type '" + type + "'", -1);
        }
    }
    for (const auto& s : j.at("stages")) {
        StageSpec stage;
        for (const auto& b : s) {
            stage.blocks.push_back(ResBlock{b.at("channels").get<std::size_t>(), b.at("stride").get<std::size_t>()});
        }
        spec.stages.push_back(std::move(stage));
    }
    spec.head_stages = j.at("head_stages").get<std::vector<std::size_t>>();
    spec.measurements = j.at("measurements").get<std::size_t>();
    return spec;
}

}  // namespace morphoreg::nn
