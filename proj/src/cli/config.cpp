#include "morphoreg/cli/config.hpp"

#include <cmath>
#include <fstream>

namespace morphoreg::cli {

namespace {

auto defaults() -> nlohmann::json {
    return {
        {"preset", "desk"},
        {"manifest", ""},
        {"out", ""},
        {"subjects", 120},
        {"dims", 32},
        {"scans_min", 1},
        {"scans_max", 3},
        {"scan_jitter", 0.005},
        {"supersample", 4},
        {"split_train", 0.60},
        {"split_validation", 0.15},
        {"split_test", 0.25},
        {"network", "desk"},
        {"heads", 4},
        {"batch_size", 6},
        {"adam_lr", 1e-4},
        {"adam_beta1", 0.9},
        {"adam_beta2", 0.999},
        {"adam_eps", 1e-8},
        {"main_epochs", 60},
        {"eval_interval", 1},
        {"swa_cycles", 5},
        {"swa_epochs_per_cycle", 4},
        {"swa_lr_max", 1e-2},
        {"swa_lr_min", 1e-6},
        {"aug_p_noise", 0.5},
        {"aug_noise_sigma", 0.05},
        {"aug_p_translate", 0.5},
        {"aug_max_shift", 3},
        {"aug_p_rotate", 0.5},
        {"aug_max_angle_deg", 15.0},
        {"aug_interpolation", "trilinear"},
        {"adam_only_branch", false},
        {"seed_data", 1},
        {"seed_model", 1},
        {"seed_train", 1},
    };
}

auto same_kind(const nlohmann::json& a, const nlohmann::json& b) -> bool {
    if (a.is_number() && b.is_number()) {
        // Integers may not become fractions; floats accept integers.
        return !(a.is_number_integer() && b.is_number_float());
    }
    return a.type() == b.type();
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

auto RunConfig::preset_names() -> std::vector<std::string> { return {"desk", "paper", "smoke"}; }

auto RunConfig::preset(const std::string& name) -> nlohmann::json {
    if (name == "desk") return nlohmann::json::object();
    if (name == "paper") return {{"main_epochs", 170}, {"aug_max_shift", 15}, {"aug_max_angle_deg", 30.0}};
    if (name == "smoke") {
        return {{"subjects", 8}, {"dims", 16}, {"supersample", 2}, {"main_epochs", 2}, {"swa_cycles", 1}};
    }
    throw ValidationError("unknown preset '" + name + "' (expected desk, paper or smoke)");
}

void RunConfig::apply_preset(const std::string& name) {
    auto p = preset(name);
    p["preset"] = name;
    merge(p);
}

void RunConfig::set(const std::string& key, const nlohmann::json& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw ValidationError("unknown config key '" + key + "'");
    }
    const bool inline_network = key == "network" && value.is_object();
    if (!inline_network && !same_kind(*it, value)) {
        throw ValidationError("config key '" + key + "' expects a value like " + it->dump() + ", got " +
                              value.dump());
    }
    *it = value;
}

void RunConfig::merge(const nlohmann::json& overrides) {
    if (!overrides.is_object()) {
        throw ValidationError("config must be a flat JSON object");
    }
    for (const auto& [k, v] : overrides.items()) {
        set(k, v);
    }
}

auto RunConfig::read_file(const std::filesystem::path& path) -> nlohmann::json {
    std::ifstream is(path);
    if (!is) {
        throw ValidationError("cannot read config '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError("config '" + path.string() + "' must be a flat JSON object");
    }
    if (j.contains("preset") && !j["preset"].is_string()) {
        throw ValidationError("config key 'preset' must be a string");
    }
    return j;
}

auto RunConfig::resolve(const std::string& preset_flag, const std::filesystem::path& file) -> RunConfig {
    RunConfig c;
    nlohmann::json overrides = nlohmann::json::object();
    if (!file.empty()) overrides = read_file(file);
    std::string name = preset_flag;
    if (name.empty()) name = overrides.value("preset", std::string("desk"));
    overrides.erase("preset");
    c.apply_preset(name);
    c.merge(overrides);
    return c;
}

void RunConfig::validate() const {
    auto positive = [&](const char* key) {
        if (get<long long>(key) <= 0) throw ValidationError(std::string(key) + " must be positive");
    };
    for (const auto* k : {"subjects", "dims", "scans_min", "scans_max", "supersample", "batch_size", "eval_interval",
                          "swa_epochs_per_cycle"}) {
        positive(k);
    }
    for (const auto* k : {"main_epochs", "swa_cycles", "aug_max_shift", "seed_data", "seed_model", "seed_train"}) {
        if (get<long long>(k) < 0) throw ValidationError(std::string(k) + " must be non-negative");
    }
    if (get<int>("scans_max") < get<int>("scans_min")) throw ValidationError("scans_max must be >= scans_min");
    const auto heads = get<int>("heads");
    if (heads < 1 || heads > 4) throw ValidationError("heads must lie in 1..4, got " + std::to_string(heads));
    const auto& net = values_.at("network");
    if (net.is_string() && net.get<std::string>() != "desk") {
        throw ValidationError("unknown network '" + net.get<std::string>() + "' (only desk or an inline spec)");
    }
    if (net.is_object()) {
        try {
            (void)nn::validate(nn::spec_from_json(net));
        } catch (const std::exception& e) {
            throw ValidationError(std::string("inline network spec is invalid: ") + e.what());
        }
    }
    const auto interp = get<std::string>("aug_interpolation");
    if (interp != "trilinear" && interp != "nearest") {
        throw ValidationError("aug_interpolation must be trilinear or nearest");
    }
    for (const auto* k : {"aug_p_noise", "aug_p_translate", "aug_p_rotate"}) {
        const double p = get<double>(k);
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(k) + " must lie in [0, 1]");
    }
    if (!(get<double>("adam_lr") > 0.0)) throw ValidationError("adam_lr must be positive");
    if (!(get<double>("swa_lr_max") >= get<double>("swa_lr_min") && get<double>("swa_lr_min") > 0.0)) {
        throw ValidationError("swa learning rates must satisfy 0 < swa_lr_min <= swa_lr_max");
    }
    const double sum = get<double>("split_train") + get<double>("split_validation") + get<double>("split_test");
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
    const double jitter = get<double>("scan_jitter");
    if (!(jitter >= 0.0 && jitter < 0.01)) throw ValidationError("scan_jitter must lie in [0, 0.01)");
}

auto RunConfig::dataset_config() const -> phantom::DatasetConfig {
    phantom::DatasetConfig c;
    c.subjects = get<std::size_t>("subjects");
    const auto d = get<std::size_t>("dims");
    c.dims = {d, d, d};
    c.scans_min = get<int>("scans_min");
    c.scans_max = get<int>("scans_max");
    c.scan_jitter = get<double>("scan_jitter");
    c.supersample = get<int>("supersample");
    c.ratios = {get<double>("split_train"), get<double>("split_validation"), get<double>("split_test")};
    c.seed = get<std::uint64_t>("seed_data");
    return c;
}

auto RunConfig::train_config() const -> optim::TrainConfig {
    optim::TrainConfig c;
    c.batch_size = get<std::size_t>("batch_size");
    c.adam = {get<double>("adam_lr"), get<double>("adam_beta1"), get<double>("adam_beta2"), get<double>("adam_eps")};
    c.main_epochs = get<std::size_t>("main_epochs");
    c.eval_interval = get<std::size_t>("eval_interval");
    c.swa_cycles = get<std::uint32_t>("swa_cycles");
    c.swa_epochs_per_cycle = get<std::size_t>("swa_epochs_per_cycle");
    c.swa_lr_max = get<double>("swa_lr_max");
    c.swa_lr_min = get<double>("swa_lr_min");
    c.augment.p_noise = get<double>("aug_p_noise");
    c.augment.noise_sigma = get<double>("aug_noise_sigma");
    c.augment.p_translate = get<double>("aug_p_translate");
    c.augment.max_shift = get<int>("aug_max_shift");
    c.augment.p_rotate = get<double>("aug_p_rotate");
    c.augment.max_angle_deg = get<double>("aug_max_angle_deg");
    c.augment.interpolation = get<std::string>("aug_interpolation") == "nearest" ? phantom::Interpolation::Nearest
                                                                                  : phantom::Interpolation::Trilinear;
    c.seed = get<std::uint64_t>("seed_train");
    c.adam_only_branch = get<bool>("adam_only_branch");
    return c;
}

auto RunConfig::network_spec(std::size_t measurements, std::size_t edge) const -> nn::NetworkSpec {
    const auto& net = values_.at("network");
    if (net.is_string()) {
        return nn::desk_spec(measurements, get<std::size_t>("heads"), edge);
    }
    auto spec = nn::spec_from_json(net);
    if (spec.measurements != measurements) {
        throw ValidationError("inline network predicts M=" + std::to_string(spec.measurements) +
                              " measurements but the manifest has M=" + std::to_string(measurements));
    }
    if (spec.input_dims != std::array<std::size_t, 3>{edge, edge, edge}) {
        throw ValidationError("inline network input dims do not match the dataset volumes");
    }
    return spec;
}

}  // namespace morphoreg::cli
