#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "clarifier/geometry.hpp"
#include "clarifier/raster.hpp"

namespace clarifier::kernels::detail {

inline double luma_of(const Rgb& p) { return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]; }

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Mirror index into [0, n) without repeating the edge sample.
inline int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

inline double residual_at(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k, double t,
                          const HandMask* skip) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const Point3 p = ray.at(t);
    if (!(p.z > 0.0)) return nan;
    const Point2 px{k.cx + k.fx * p.x / p.z, k.cy + k.fy * p.y / p.z};
    if (!in_image(px, depth.width, depth.height)) return nan;
    if (skip) {
        const int x = static_cast<int>(std::lround(px.u));
        const int y = static_cast<int>(std::lround(px.v));
        if (skip->contains(x, y) && skip->at(x, y)) return nan;
    }
    const auto d = sample_depth(depth, px);
    return d ? p.z - *d : nan;
}

}  // namespace clarifier::kernels::detail
