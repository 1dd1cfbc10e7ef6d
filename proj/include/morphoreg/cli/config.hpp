#pragma once

#include "morphoreg/nn/spec.hpp"
#include "morphoreg/optim/trainer.hpp"
#include "morphoreg/phantom/dataset.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace morphoreg::cli {

// Bad user input: exit code 1.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Every knob of a run as a flat key -> value object. Resolution order: defaults, then the
// named preset, then the config file, then command-line flags.
class RunConfig {
public:
    RunConfig();

    [[nodiscard]] static auto preset_names() -> std::vector<std::string>;
    // Keys a preset changes relative to the defaults.
    [[nodiscard]] static auto preset(const std::string& name) -> nlohmann::json;

    void apply_preset(const std::string& name);
    // Rejects unknown keys and values whose type differs from the default's.
    void merge(const nlohmann::json& overrides);
    [[nodiscard]] static auto read_file(const std::filesystem::path& path) -> nlohmann::json;
    // Defaults, then the preset (the flag if given, else the file's "preset" key), then the
    // file's remaining keys.
    [[nodiscard]] static auto resolve(const std::string& preset_flag, const std::filesystem::path& file) -> RunConfig;
    void set(const std::string& key, const nlohmann::json& value);

    [[nodiscard]] auto json() const -> const nlohmann::json& { return values_; }
    [[nodiscard]] auto dump() const -> std::string { return values_.dump(2) + "\n"; }

    template <typename T>
    [[nodiscard]] auto get(const std::string& key) const -> T {
        return values_.at(key).get<T>();
    }

    // Range checks across keys.
    void validate() const;

    [[nodiscard]] auto dataset_config() const -> phantom::DatasetConfig;
    [[nodiscard]] auto train_config() const -> optim::TrainConfig;
    // Desk preset or the inline spec stored under "network", for a dataset of cubic volumes.
    [[nodiscard]] auto network_spec(std::size_t measurements, std::size_t edge) const -> nn::NetworkSpec;

private:
    nlohmann::json values_;
};

}  // namespace morphoreg::cli
