#include "morphoreg/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace morphoreg::phantom {

namespace {

auto norm(const Vec3& v) -> double { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

auto splitmix64(std::uint64_t x) -> std::uint64_t {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

auto tetrahedral_direction(std::size_t i) -> Vec3 {
    static constexpr std::array<Vec3, 4> dirs{{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};
    const double s = 1.0 / std::sqrt(3.0);
    return {dirs[i][0] * s, dirs[i][1] * s, dirs[i][2] * s};
}

// Distance from the centre to the nearest face of the field of view.
auto inner_extent(const PhantomParams& p) -> double {
    double e = INFINITY;
    for (std::size_t a = 0; a < 3; ++a) {
        const double lo = -0.5 * p.voxel_size;
        const double hi = (static_cast<double>(p.dims[a]) - 0.5) * p.voxel_size;
        e = std::min({e, p.center[a] - lo, hi - p.center[a]});
    }
    return e;
}

}  // namespace

auto length_scale(Dims dims) -> double {
    const double m = static_cast<double>(*std::min_element(dims.begin(), dims.end()));
    return (0.5 * m - 2.0) / 14.0;
}

auto measurement_names() -> std::vector<std::string> {
    std::vector<std::string> names;
    for (auto kind : kAllKinds) {
        for (std::size_t i = 0; i < 4; ++i) {
            names.push_back(std::string(kind_prefix(kind)) + (kind == MeasurementKind::Volume ? "_blob" : "_q") +
                            std::to_string(i));
        }
    }
    return names;
}

auto targets_of(const PhantomParams& p) -> TargetVector {
    const auto names = measurement_names();
    TargetVector t;
    for (std::size_t i = 0; i < 4; ++i) {
        const double r = p.blobs[i].radius;
        t.push_back({names[i], MeasurementKind::Volume, 4.0 / 3.0 * std::numbers::pi * r * r * r});
    }
    for (std::size_t q = 0; q < 4; ++q) {
        t.push_back({names[4 + q], MeasurementKind::Thickness, p.quadrant_thickness(q)});
    }
    for (std::size_t q = 0; q < 4; ++q) {
        t.push_back({names[8 + q], MeasurementKind::Curvature, 1.0 / p.quadrant_radius(q)});
    }
    return t;
}

void validate(const PhantomParams& p) {
    auto fail = [](const std::string& what) { throw PhantomError("invalid phantom: " + what); };
    for (auto d : p.dims) {
        if (d == 0) fail("dims must be positive");
    }
    if (!(p.voxel_size > 0.0)) fail("voxel size must be positive");
    if (p.supersample < 1) fail("supersampling factor must be >= 1");
    if (!(p.r_mid > 0.0) || !(p.thickness > 0.0)) fail("shell radius and thickness must be positive");
    auto intensity_ok = [](float v) { return v > 0.2f && v <= 1.0f; };
    if (!intensity_ok(p.shell_intensity)) fail("shell intensity must lie in (0.2, 1]");

    double outer = 0.0, inner = INFINITY;
    for (std::size_t q = 0; q < 4; ++q) {
        if (!(p.thickness_mult[q] > 0.0) || !(p.radius_mult[q] > 0.0)) fail("quadrant multipliers must be positive");
        const double r = p.quadrant_radius(q), t = p.quadrant_thickness(q);
        if (t >= 2.0 * r) fail("quadrant " + std::to_string(q) + " is thicker than its diameter");
        outer = std::max(outer, r + 0.5 * t);
        inner = std::min(inner, r - 0.5 * t);
    }
    const double room = inner_extent(p) - 2.0 * p.voxel_size;
    if (outer > room) {
        fail("shell outer radius " + std::to_string(outer) + " mm exceeds the field of view less a 2-voxel margin (" +
             std::to_string(room) + " mm)");
    }
    double blob_extent = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& b = p.blobs[i];
        if (!(b.radius > 0.0)) fail("blob " + std::to_string(i) + " radius must be positive");
        if (!intensity_ok(b.intensity)) fail("blob intensity must lie in (0.2, 1]");
        blob_extent = std::max(blob_extent, norm(b.offset) + b.radius);
        for (std::size_t j = 0; j < i; ++j) {
            const Vec3 d{b.offset[0] - p.blobs[j].offset[0], b.offset[1] - p.blobs[j].offset[1],
                         b.offset[2] - p.blobs[j].offset[2]};
            if (norm(d) < b.radius + p.blobs[j].radius) {
                fail("blobs " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
            }
        }
    }
    if (!(inner > blob_extent)) {
        fail("shell inner radius " + std::to_string(inner) + " mm does not clear the blobs (extent " +
             std::to_string(blob_extent) + " mm)");
    }
}

auto default_params(Dims dims) -> PhantomParams {
    PhantomParams p;
    p.dims = dims;
    const double scale = length_scale(dims);
    for (std::size_t a = 0; a < 3; ++a) {
        p.center[a] = 0.5 * (static_cast<double>(dims[a]) - 1.0);
    }
    p.r_mid = 10.0 * scale;
    p.thickness = 2.0 * scale;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto d = tetrahedral_direction(i);
        p.blobs[i].offset = {4.1 * scale * d[0], 4.1 * scale * d[1], 4.1 * scale * d[2]};
        p.blobs[i].radius = 2.2 * scale;
    }
    return p;
}

auto render_occupancy(const PhantomParams& p, int structure) -> Volume3D {
    validate(p);
    if (structure < kShell || structure >= 4) {
        throw PhantomError("unknown structure " + std::to_string(structure));
    }
    Volume3D out(p.dims, p.voxel_size);
    const double vs = p.voxel_size;
    const double half_diag = 0.5 * std::sqrt(3.0) * vs;
    const int s = p.supersample;
    std::vector<double> sub(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) {
        sub[static_cast<std::size_t>(i)] = ((i + 0.5) / s - 0.5) * vs;
    }
    const double inv_samples = 1.0 / (static_cast<double>(s) * s * s);

    Vec3 c = p.center;
    double radius = 0.0;
    if (structure != kShell) {
        const auto& b = p.blobs[static_cast<std::size_t>(structure)];
        c = {p.center[0] + b.offset[0], p.center[1] + b.offset[1], p.center[2] + b.offset[2]};
        radius = b.radius;
    }
    std::array<double, 4> r_in{}, r_out{};
    for (std::size_t q = 0; q < 4; ++q) {
        r_in[q] = p.quadrant_radius(q) - 0.5 * p.quadrant_thickness(q);
        r_out[q] = p.quadrant_radius(q) + 0.5 * p.quadrant_thickness(q);
    }
    auto inside = [&](double z, double y, double x) -> bool {
        const double dz = z - c[0], dy = y - c[1], dx = x - c[2];
        const double d = std::sqrt(dz * dz + dy * dy + dx * dx);
        if (structure != kShell) {
            return d <= radius;
        }
        const auto q = quadrant_of(y, x, c);
        return d >= r_in[q] && d <= r_out[q];
    };
    // True when the whole voxel lies on one side of every surface of the structure.
    auto uniform = [&](double z, double y, double x) -> bool {
        const double dz = z - c[0], dy = y - c[1], dx = x - c[2];
        const double d = std::sqrt(dz * dz + dy * dy + dx * dx);
        if (structure != kShell) {
            return std::abs(d - radius) > half_diag;
        }
        if (std::abs(dy) <= 0.5 * vs || std::abs(dx) <= 0.5 * vs) {
            return false;
        }
        const auto q = quadrant_of(y, x, c);
        return std::abs(d - r_in[q]) > half_diag && std::abs(d - r_out[q]) > half_diag;
    };

    for (std::size_t z = 0; z < p.dims[0]; ++z) {
        const double zc = static_cast<double>(z) * vs;
        for (std::size_t y = 0; y < p.dims[1]; ++y) {
            const double yc = static_cast<double>(y) * vs;
            for (std::size_t x = 0; x < p.dims[2]; ++x) {
                const double xc = static_cast<double>(x) * vs;
                double occ = 0.0;
                if (uniform(zc, yc, xc)) {
                    occ = inside(zc, yc, xc) ? 1.0 : 0.0;
                } else {
                    int hits = 0;
                    for (double oz : sub)
                        for (double oy : sub)
                            for (double ox : sub) hits += inside(zc + oz, yc + oy, xc + ox) ? 1 : 0;
                    occ = hits * inv_samples;
                }
                out.at(z, y, x) = static_cast<float>(occ);
            }
        }
    }
    return out;
}

auto render(const PhantomParams& p) -> Volume3D {
    auto out = render_occupancy(p, kShell);
    for (auto& v : out.voxels()) {
        v *= p.shell_intensity;
    }
    for (int b = 0; b < 4; ++b) {
        const auto occ = render_occupancy(p, b);
        const float level = p.blobs[static_cast<std::size_t>(b)].intensity;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.voxels()[i] = std::min(1.0f, out.voxels()[i] + level * occ.voxels()[i]);
        }
    }
    return out;
}

auto generate_phantom(const PhantomParams& params) -> Phantom {
    return {render(params), targets_of(params)};
}

auto sample_params(const ParamRanges& r, Dims dims, int supersample, std::mt19937_64& rng) -> PhantomParams {
    auto u = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const double scale = length_scale(dims);
    PhantomParams p;
    p.dims = dims;
    p.supersample = supersample;
    for (std::size_t a = 0; a < 3; ++a) {
        p.center[a] = 0.5 * (static_cast<double>(dims[a]) - 1.0) + u(-r.center_jitter, r.center_jitter) * scale;
    }
    p.r_mid = u(r.r_mid_lo, r.r_mid_hi) * scale;
    p.thickness = u(r.thickness_lo, r.thickness_hi) * scale;
    for (std::size_t q = 0; q < 4; ++q) {
        p.thickness_mult[q] = u(r.thickness_mult_lo, r.thickness_mult_hi);
        p.radius_mult[q] = u(r.radius_mult_lo, r.radius_mult_hi);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const auto d = tetrahedral_direction(i);
        const double dist = u(r.blob_distance_lo, r.blob_distance_hi) * scale;
        p.blobs[i].offset = {dist * d[0], dist * d[1], dist * d[2]};
        p.blobs[i].radius = u(r.blob_radius_lo, r.blob_radius_hi) * scale;
        p.blobs[i].intensity = r.blob_intensity;
    }
    p.shell_intensity = r.shell_intensity;
    validate(p);
    return p;
}

auto jitter_params(const PhantomParams& params, double rel, std::mt19937_64& rng) -> PhantomParams {
    std::uniform_real_distribution<double> u(1.0 - rel, 1.0 + rel);
    auto p = params;
    p.r_mid *= u(rng);
    p.thickness *= u(rng);
    for (std::size_t q = 0; q < 4; ++q) {
        p.thickness_mult[q] *= u(rng);
        p.radius_mult[q] *= u(rng);
    }
    for (auto& b : p.blobs) {
        b.radius *= u(rng);
        const double f = u(rng);
        for (auto& o : b.offset) o *= f;
    }
    validate(p);
    return p;
}

auto stream_seed(std::uint64_t master, std::uint64_t subject, std::uint64_t scan) -> std::uint64_t {
    return splitmix64(splitmix64(splitmix64(master) ^ subject) ^ (scan + 0x632be59bd9b4e019ULL));
}

}  // namespace morphoreg::phantom
