#include "morphoreg/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace morphoreg::nn {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
auto read_pod(std::istream& is) -> T {
    T value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw CheckpointError("truncated checkpoint");
    }
    return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    using nlohmann::json;
    json table = json::array();
    for (const auto& p : checkpoint.model.params()) {
        table.push_back({{"name", p.name}, {"shape", p.value.shape()}});
    }
    const json header{{"network", to_json(checkpoint.model.spec())}, {"extra", checkpoint.extra}, {"params", table}};
    const auto text = header.dump(2);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw CheckpointError("cannot open '" + path.string() + "' for writing");
    }
    os.write(kMagic.data(), kMagic.size());
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : checkpoint.model.params()) {
        const auto data = p.value.data();
        os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    }
    if (!os) {
        throw CheckpointError("failed writing '" + path.string() + "'");
    }
}

auto load_checkpoint(const std::filesystem::path& path) -> Checkpoint {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    }
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
        throw CheckpointError("'" + path.string() + "' is not a checkpoint (bad magic)");
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto length = read_pod<std::uint64_t>(is);
    std::string text(length, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(length))) {
        throw CheckpointError("truncated checkpoint header");
    }
    const auto header = nlohmann::json::parse(text);
    auto spec = spec_from_json(header.at("network"));

    std::vector<Parameter> params;
    for (const auto& entry : header.at("params")) {
        auto shape = entry.at("shape").get<tensor::Shape>();
        std::vector<float> values(tensor::numel(shape));
        if (!is.read(reinterpret_cast<char*>(values.data()),
                     static_cast<std::streamsize>(values.size() * sizeof(float)))) {
            throw CheckpointError("truncated payload for parameter '" + entry.at("name").get<std::string>() + "'");
        }
        params.push_back({entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values))});
    }
    Checkpoint out{ModelState(std::move(spec), std::move(params)), header.value("extra", nlohmann::json::object())};

    // Reject tables that don't match what the spec builds.
    const auto reference = build_model(out.model.spec(), 0);
    if (reference.params().size() != out.model.params().size()) {
        throw CheckpointError("parameter table does not match the stored network spec");
    }
    for (std::size_t i = 0; i < reference.params().size(); ++i) {
        const auto& a = reference.params()[i];
        const auto& b = out.model.params()[i];
        if (a.name != b.name || a.value.shape() != b.value.shape()) {
            throw CheckpointError("parameter '" + b.name + "' does not match the stored network spec");
        }
    }
    return out;
}

}  // namespace morphoreg::nn
