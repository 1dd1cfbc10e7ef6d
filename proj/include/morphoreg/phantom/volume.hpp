#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace morphoreg::phantom {

using Dims = std::array<std::size_t, 3>;  // D, H, W

struct PhantomError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Scalar volume, D-major (index = (z * H + y) * W + x), isotropic voxels.
class Volume3D {
public:
    Volume3D() = default;
    explicit Volume3D(Dims dims, double voxel_size = 1.0);
    Volume3D(Dims dims, std::vector<float> voxels, double voxel_size = 1.0);

    [[nodiscard]] auto dims() const -> const Dims& { return dims_; }
    [[nodiscard]] auto voxel_size() const -> double { return voxel_size_; }
    [[nodiscard]] auto size() const -> std::size_t { return voxels_.size(); }
    [[nodiscard]] auto voxels() const -> const std::vector<float>& { return voxels_; }
    [[nodiscard]] auto voxels() -> std::vector<float>& { return voxels_; }

    [[nodiscard]] auto index(std::size_t z, std::size_t y, std::size_t x) const -> std::size_t {
        return (z * dims_[1] + y) * dims_[2] + x;
    }
    [[nodiscard]] auto at(std::size_t z, std::size_t y, std::size_t x) const -> float { return voxels_[index(z, y, x)]; }
    auto at(std::size_t z, std::size_t y, std::size_t x) -> float& { return voxels_[index(z, y, x)]; }

    // Number of voxels with value > threshold.
    [[nodiscard]] auto count_above(float threshold) const -> std::size_t;
    [[nodiscard]] auto sum() const -> double;

    friend auto operator==(const Volume3D&, const Volume3D&) -> bool = default;

private:
    Dims dims_{};
    double voxel_size_ = 1.0;
    std::vector<float> voxels_;
};

// "MVOL" + 3 x u32 dims (D, H, W) + float32 voxels, little-endian.
void save_volume(const std::filesystem::path& path, const Volume3D& volume);
[[nodiscard]] auto load_volume(const std::filesystem::path& path) -> Volume3D;

}  // namespace morphoreg::phantom
