#pragma once

#include "morphoreg/phantom/volume.hpp"

#include <array>
#include <random>

namespace morphoreg::phantom {

enum class Interpolation { Trilinear, Nearest };

struct AugmentConfig {
    double p_noise = 0.5;
    double noise_sigma = 0.05;
    double p_translate = 0.5;
    int max_shift = 3;  // voxels, per axis
    double p_rotate = 0.5;
    double max_angle_deg = 15.0;
    Interpolation interpolation = Interpolation::Trilinear;

    [[nodiscard]] static auto disabled() -> AugmentConfig;
    // Translation 15 voxels, rotation 30 degrees.
    [[nodiscard]] static auto wide_scale() -> AugmentConfig;
};

struct AugmentInfo {
    bool noised = false;
    bool rotated = false;
    double angle_deg = 0.0;
    std::array<double, 3> axis{};
    std::array<int, 3> shift{};  // z, y, x
    // Times a drawn shift was shrunk because it would have clipped foreground.
    int shift_retries = 0;
};

// Integer shift: the value at (z, y, x) moves to (z + dz, y + dy, x + dx); vacated voxels are 0.
[[nodiscard]] auto translate(const Volume3D& v, std::array<int, 3> shift) -> Volume3D;

// Rotation about the volume centre by angle_deg around the unit axis (z, y, x components).
[[nodiscard]] auto rotate(const Volume3D& v, std::array<double, 3> axis, double angle_deg, Interpolation interp)
    -> Volume3D;

// Applies rotation, then translation, then additive Gaussian noise, each with its own
// probability. Values after noise are not clamped.
[[nodiscard]] auto augment(const Volume3D& v, const AugmentConfig& cfg, std::mt19937_64& rng,
                           AugmentInfo* info = nullptr) -> Volume3D;

}  // namespace morphoreg::phantom
