#include "morphoreg/phantom/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace morphoreg::phantom {

auto AugmentConfig::disabled() -> AugmentConfig {
    AugmentConfig c;
    c.p_noise = c.p_translate = c.p_rotate = 0.0;
    return c;
}

auto AugmentConfig::wide_scale() -> AugmentConfig {
    AugmentConfig c;
    c.max_shift = 15;
    c.max_angle_deg = 30.0;
    return c;
}

auto translate(const Volume3D& v, std::array<int, 3> shift) -> Volume3D {
    Volume3D out(v.dims(), v.voxel_size());
    const auto& d = v.dims();
    auto range = [](int s, std::size_t n) -> std::pair<std::size_t, std::size_t> {
        // Source indices whose destination stays inside [0, n).
        const long lo = std::max(0L, -static_cast<long>(s));
        const long hi = std::min(static_cast<long>(n), static_cast<long>(n) - s);
        return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
    };
    const auto [z0, z1] = range(shift[0], d[0]);
    const auto [y0, y1] = range(shift[1], d[1]);
    const auto [x0, x1] = range(shift[2], d[2]);
    for (std::size_t z = z0; z < z1; ++z)
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) {
                out.at(static_cast<std::size_t>(static_cast<long>(z) + shift[0]),
                       static_cast<std::size_t>(static_cast<long>(y) + shift[1]),
                       static_cast<std::size_t>(static_cast<long>(x) + shift[2])) = v.at(z, y, x);
            }
    return out;
}

auto rotate(const Volume3D& v, std::array<double, 3> axis, double angle_deg, Interpolation interp) -> Volume3D {
    const double len = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (!(len > 0.0)) {
        throw PhantomError("rotation axis must be non-zero");
    }
    for (auto& a : axis) a /= len;
    const double th = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th), s = std::sin(th), t = 1.0 - c;
    const auto [az, ay, ax] = axis;
    // Rodrigues matrix in (z, y, x) coordinates.
    std::array<std::array<double, 3>, 3> R{{{t * az * az + c, t * az * ay - s * ax, t * az * ax + s * ay},
                                            {t * ay * az + s * ax, t * ay * ay + c, t * ay * ax - s * az},
                                            {t * ax * az - s * ay, t * ax * ay + s * az, t * ax * ax + c}}};
    // Snap round-off so quarter turns about grid axes map voxels exactly.
    for (auto& row : R)
        for (auto& e : row)
            if (std::abs(e - std::round(e)) < 1e-12) e = std::round(e);

    const auto& d = v.dims();
    const std::array<double, 3> ctr{0.5 * (static_cast<double>(d[0]) - 1.0), 0.5 * (static_cast<double>(d[1]) - 1.0),
                                    0.5 * (static_cast<double>(d[2]) - 1.0)};
    auto sample = [&](long z, long y, long x) -> double {
        if (z < 0 || y < 0 || x < 0 || z >= static_cast<long>(d[0]) || y >= static_cast<long>(d[1]) ||
            x >= static_cast<long>(d[2])) {
            return 0.0;
        }
        return v.at(static_cast<std::size_t>(z), static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };

    Volume3D out(d, v.voxel_size());
    for (std::size_t z = 0; z < d[0]; ++z)
        for (std::size_t y = 0; y < d[1]; ++y)
            for (std::size_t x = 0; x < d[2]; ++x) {
                const std::array<double, 3> p{static_cast<double>(z) - ctr[0], static_cast<double>(y) - ctr[1],
                                              static_cast<double>(x) - ctr[2]};
                // Source point = R^T p (inverse mapping).
                std::array<double, 3> q{};
                for (std::size_t i = 0; i < 3; ++i) {
                    q[i] = R[0][i] * p[0] + R[1][i] * p[1] + R[2][i] * p[2] + ctr[i];
                }
                double val = 0.0;
                if (interp == Interpolation::Nearest) {
                    val = sample(std::lround(q[0]), std::lround(q[1]), std::lround(q[2]));
                } else {
                    const double fz = std::floor(q[0]), fy = std::floor(q[1]), fx = std::floor(q[2]);
                    const double wz = q[0] - fz, wy = q[1] - fy, wx = q[2] - fx;
                    const long iz = static_cast<long>(fz), iy = static_cast<long>(fy), ix = static_cast<long>(fx);
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            for (int e = 0; e < 2; ++e) {
                                const double w = (a ? wz : 1 - wz) * (b ? wy : 1 - wy) * (e ? wx : 1 - wx);
                                if (w != 0.0) val += w * sample(iz + a, iy + b, ix + e);
                            }
                }
                out.at(z, y, x) = static_cast<float>(val);
            }
    return out;
}

namespace {

// Per-axis [lo, hi] index range of non-zero voxels; false if the volume is empty.
auto foreground_box(const Volume3D& v, std::array<std::size_t, 3>& lo, std::array<std::size_t, 3>& hi) -> bool {
    const auto& d = v.dims();
    lo = {d[0], d[1], d[2]};
    hi = {0, 0, 0};
    bool any = false;
    for (std::size_t z = 0; z < d[0]; ++z)
        for (std::size_t y = 0; y < d[1]; ++y)
            for (std::size_t x = 0; x < d[2]; ++x)
                if (v.at(z, y, x) != 0.0f) {
                    any = true;
                    const std::array<std::size_t, 3> p{z, y, x};
                    for (std::size_t a = 0; a < 3; ++a) {
                        lo[a] = std::min(lo[a], p[a]);
                        hi[a] = std::max(hi[a], p[a]);
                    }
                }
    return any;
}

}  // namespace

auto augment(const Volume3D& v, const AugmentConfig& cfg, std::mt19937_64& rng, AugmentInfo* info) -> Volume3D {
    AugmentInfo local;
    AugmentInfo& inf = info != nullptr ? *info : local;
    inf = AugmentInfo{};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Every draw happens regardless of the coin flips, so the stream advances identically.
    const bool do_rotate = unit(rng) < cfg.p_rotate;
    std::normal_distribution<double> g(0.0, 1.0);
    std::array<double, 3> axis{g(rng), g(rng), g(rng)};
    const double angle = (2.0 * unit(rng) - 1.0) * cfg.max_angle_deg;
    const bool do_translate = unit(rng) < cfg.p_translate;
    std::uniform_int_distribution<int> shift_dist(-cfg.max_shift, cfg.max_shift);
    std::array<int, 3> shift{shift_dist(rng), shift_dist(rng), shift_dist(rng)};
    const bool do_noise = unit(rng) < cfg.p_noise;

    if (!do_rotate && !do_translate && !do_noise) {
        return v;
    }
    Volume3D out = v;
    if (do_rotate && cfg.max_angle_deg > 0.0) {
        if (axis[0] == 0.0 && axis[1] == 0.0 && axis[2] == 0.0) axis = {1.0, 0.0, 0.0};
        out = rotate(out, axis, angle, cfg.interpolation);
        inf.rotated = true;
        inf.angle_deg = angle;
        const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
        inf.axis = {axis[0] / n, axis[1] / n, axis[2] / n};
    }
    if (do_translate && cfg.max_shift > 0) {
        std::array<std::size_t, 3> lo{}, hi{};
        if (foreground_box(out, lo, hi)) {
            const auto& d = out.dims();
            auto fits = [&](const std::array<int, 3>& s) {
                for (std::size_t a = 0; a < 3; ++a) {
                    const long l = static_cast<long>(lo[a]) + s[a], h = static_cast<long>(hi[a]) + s[a];
                    if (l < 0 || h >= static_cast<long>(d[a])) return false;
                }
                return true;
            };
            while (!fits(shift)) {
                for (auto& s : shift) s /= 2;
                ++inf.shift_retries;
            }
        }
        out = translate(out, shift);
        inf.shift = shift;
    }
    if (do_noise && cfg.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (auto& x : out.voxels()) {
            x = static_cast<float>(x + noise(rng));
        }
        inf.noised = true;
    }
    return out;
}

}  // namespace morphoreg::phantom
