#pragma once

#include "morphoreg/nn/model.hpp"

#include <filesystem>
#include <stdexcept>

#include "json.hpp"

namespace morphoreg::nn {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    ModelState model;
    // Free-form structured metadata stored next to the network spec (scaler, measurement names).
    nlohmann::json extra = nlohmann::json::object();
};

// Layout: "MRCK" magic, u32 version, u64 header length, JSON header (network spec,
// extra metadata, parameter name/shape table), then raw little-endian float32
// payloads in table order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
auto load_checkpoint(const std::filesystem::path& path) -> Checkpoint;

}  // namespace morphoreg::nn
