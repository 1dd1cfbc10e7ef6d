#include "morphoreg/phantom/volume.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

namespace morphoreg::phantom {

static_assert(std::endian::native == std::endian::little, "volume I/O assumes a little-endian host");

namespace {

void check_dims(const Dims& dims) {
    for (auto d : dims) {
        if (d == 0) {
            throw PhantomError("volume dims must be positive");
        }
    }
}

}  // namespace

Volume3D::Volume3D(Dims dims, double voxel_size) : dims_(dims), voxel_size_(voxel_size) {
    check_dims(dims);
    voxels_.assign(dims[0] * dims[1] * dims[2], 0.0f);
}

Volume3D::Volume3D(Dims dims, std::vector<float> voxels, double voxel_size)
    : dims_(dims), voxel_size_(voxel_size), voxels_(std::move(voxels)) {
    check_dims(dims);
    if (voxels_.size() != dims[0] * dims[1] * dims[2]) {
        throw PhantomError("volume has " + std::to_string(voxels_.size()) + " voxels, dims imply " +
                           std::to_string(dims[0] * dims[1] * dims[2]));
    }
}

auto Volume3D::count_above(float threshold) const -> std::size_t {
    std::size_t n = 0;
    for (auto v : voxels_) {
        n += v > threshold ? 1 : 0;
    }
    return n;
}

auto Volume3D::sum() const -> double {
    double s = 0.0;
    for (auto v : voxels_) {
        s += v;
    }
    return s;
}

void save_volume(const std::filesystem::path& path, const Volume3D& volume) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    os.write("MVOL", 4);
    for (auto d : volume.dims()) {
        const auto v = static_cast<std::uint32_t>(d);
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    os.write(reinterpret_cast<const char*>(volume.voxels().data()),
             static_cast<std::streamsize>(volume.size() * sizeof(float)));
    if (!os) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

auto load_volume(const std::filesystem::path& path) -> Volume3D {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open volume '" + path.string() + "'");
    }
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "MVOL") {
        throw std::runtime_error("'" + path.string() + "' is not a volume file (bad magic)");
    }
    Dims dims{};
    for (auto& d : dims) {
        std::uint32_t v = 0;
        if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
            throw std::runtime_error("truncated volume header in '" + path.string() + "'");
        }
        d = v;
    }
    std::vector<float> voxels(dims[0] * dims[1] * dims[2]);
    if (!is.read(reinterpret_cast<char*>(voxels.data()), static_cast<std::streamsize>(voxels.size() * sizeof(float)))) {
        throw std::runtime_error("truncated voxel data in '" + path.string() + "'");
    }
    for (auto v : voxels) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("non-finite voxel in '" + path.string() + "'");
        }
    }
    return Volume3D(dims, std::move(voxels));
}

}  // namespace morphoreg::phantom
