#pragma once

#include "morphoreg/common/measurement.hpp"
#include "morphoreg/phantom/volume.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace morphoreg::phantom {

using Vec3 = std::array<double, 3>;  // z, y, x in mm

struct Blob {
    Vec3 offset{};  // from the shell centre
    double radius = 1.0;
    float intensity = 0.9f;
};

// A spherical shell split into four quadrant parcels (by the signs of x and y relative
// to the centre), each with its own mid-surface radius and thickness, enclosing four
// spherical blobs. Voxel i has its centre at i * voxel_size.
struct PhantomParams {
    Dims dims{32, 32, 32};
    double voxel_size = 1.0;
    Vec3 center{15.5, 15.5, 15.5};
    double r_mid = 10.0;
    double thickness = 2.0;
    std::array<double, 4> thickness_mult{1.0, 1.0, 1.0, 1.0};
    std::array<double, 4> radius_mult{1.0, 1.0, 1.0, 1.0};
    std::array<Blob, 4> blobs{};
    float shell_intensity = 0.6f;
    int supersample = 4;

    [[nodiscard]] auto quadrant_radius(std::size_t q) const -> double { return r_mid * radius_mult[q]; }
    [[nodiscard]] auto quadrant_thickness(std::size_t q) const -> double { return thickness * thickness_mult[q]; }
};

// Quadrant of a point: bit 0 set when x >= cx, bit 1 when y >= cy.
[[nodiscard]] inline auto quadrant_of(double y, double x, const Vec3& center) -> std::size_t {
    return (x >= center[2] ? 1u : 0u) + (y >= center[1] ? 2u : 0u);
}

struct Target {
    std::string name;
    MeasurementKind kind;
    double value;
};
using TargetVector = std::vector<Target>;

inline constexpr std::size_t kMeasurements = 12;

// vol_blob0..3, thk_q0..3, curv_q0..3
[[nodiscard]] auto measurement_names() -> std::vector<std::string>;
[[nodiscard]] auto targets_of(const PhantomParams& params) -> TargetVector;

// Throws PhantomError on containment or range violations.
void validate(const PhantomParams& params);

// Centred phantom with blobs along the tetrahedral directions, scaled to the volume.
[[nodiscard]] auto default_params(Dims dims = {32, 32, 32}) -> PhantomParams;

inline constexpr int kShell = -1;

// Fractional occupancy of one structure (kShell or a blob index) per voxel.
[[nodiscard]] auto render_occupancy(const PhantomParams& params, int structure) -> Volume3D;
[[nodiscard]] auto render(const PhantomParams& params) -> Volume3D;

struct Phantom {
    Volume3D volume;
    TargetVector targets;
};

[[nodiscard]] auto generate_phantom(const PhantomParams& params) -> Phantom;

// Length multiplier for a field of view: 1 at 32 voxels, chosen so the outer shell keeps
// its 2-voxel margin at any size.
[[nodiscard]] auto length_scale(Dims dims) -> double;

// Sampling ranges for random subjects; lengths are for a 32-voxel field of view and are
// multiplied by length_scale(dims).
struct ParamRanges {
    double r_mid_lo = 9.5, r_mid_hi = 10.5;
    double thickness_lo = 1.5, thickness_hi = 2.5;
    double thickness_mult_lo = 0.8, thickness_mult_hi = 1.2;
    double radius_mult_lo = 0.9, radius_mult_hi = 1.1;
    double blob_distance_lo = 4.0, blob_distance_hi = 4.2;
    double blob_radius_lo = 1.8, blob_radius_hi = 2.7;
    double center_jitter = 0.5;
    float shell_intensity = 0.6f;
    float blob_intensity = 0.9f;
};

[[nodiscard]] auto sample_params(const ParamRanges& ranges, Dims dims, int supersample, std::mt19937_64& rng)
    -> PhantomParams;

// Re-scan of the same subject: every length scaled by an independent factor in
// [1 - rel, 1 + rel].
[[nodiscard]] auto jitter_params(const PhantomParams& params, double rel, std::mt19937_64& rng) -> PhantomParams;

// Independent stream per (master seed, subject, scan).
[[nodiscard]] auto stream_seed(std::uint64_t master, std::uint64_t subject, std::uint64_t scan) -> std::uint64_t;

}  // namespace morphoreg::phantom
