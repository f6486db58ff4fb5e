#include <omp.h>

#include <algorithm>
#include <cmath>

#include "clarifier/kernels.hpp"
#include "kernels_common.hpp"

namespace clarifier::kernels {

namespace {
// Below this many elements the thread fork costs more than the loop.
constexpr long kParallelThreshold = 1 << 14;
}  // namespace

GrayImage luma(const RgbImage& image) {
    GrayImage out(image.width, image.height);
    const long n = static_cast<long>(image.data.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
    for (long i = 0; i < n; ++i) out.data[i] = detail::luma_of(image.data[i]);
    return out;
}

double laplacian_variance(const GrayImage& image) {
    require(image.width >= 3 && image.height >= 3, "laplacian needs at least a 3x3 region");
    const int w = image.width;
    const int h = image.height;
    const long n = static_cast<long>(w - 2) * (h - 2);
    auto response = [&](int x, int y) {
        return image.at(x, y - 1) + image.at(x - 1, y) - 4.0 * image.at(x, y) + image.at(x + 1, y) + image.at(x, y + 1);
    };

    double sum = 0.0;
#pragma omp parallel for reduction(+ : sum) schedule(static) if (n > kParallelThreshold)
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) sum += response(x, y);
    }
    const double mean = sum / static_cast<double>(n);

    double sq = 0.0;
#pragma omp parallel for reduction(+ : sq) schedule(static) if (n > kParallelThreshold)
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double d = response(x, y) - mean;
            sq += d * d;
        }
    }
    return sq / static_cast<double>(n);
}

GrayImage gaussian_blur(const GrayImage& image, double sigma) {
    require(sigma >= 0.0, "gaussian sigma must be non-negative");
    if (sigma == 0.0 || image.empty()) return image;
    const auto taps = gaussian_taps(sigma);
    const int r = static_cast<int>(taps.size() / 2);
    const int w = image.width;
    const int h = image.height;
    const bool par = static_cast<long>(w) * h > kParallelThreshold;

    GrayImage tmp(w, h);
#pragma omp parallel for schedule(static) if (par)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += taps[i + r] * image.at(detail::reflect(x + i, w), y);
            tmp.at(x, y) = acc;
        }
    }
    GrayImage out(w, h);
#pragma omp parallel for schedule(static) if (par)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += taps[i + r] * tmp.at(x, detail::reflect(y + i, h));
            out.at(x, y) = acc;
        }
    }
    return out;
}

RgbImage gaussian_blur(const RgbImage& image, double sigma) {
    require(sigma >= 0.0, "gaussian sigma must be non-negative");
    if (sigma == 0.0 || image.empty()) return image;
    RgbImage out(image.width, image.height);
    out.source = image.source;
    const long n = static_cast<long>(image.data.size());
    for (int c = 0; c < 3; ++c) {
        GrayImage plane(image.width, image.height);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
        for (long i = 0; i < n; ++i) plane.data[i] = image.data[i][c];
        const auto blurred = gaussian_blur(plane, sigma);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
        for (long i = 0; i < n; ++i) out.data[i][c] = detail::to_byte(blurred.data[i]);
    }
    return out;
}

MaskMoments mask_moments(const HandMask& mask) {
    const int w = mask.width;
    const int h = mask.height;
    const bool par = static_cast<long>(w) * h > kParallelThreshold;
    double count = 0, sx = 0, sy = 0;
#pragma omp parallel for reduction(+ : count, sx, sy) schedule(static) if (par)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            count += 1;
            sx += x;
            sy += y;
        }
    }
    MaskMoments m;
    m.count = static_cast<std::size_t>(count);
    if (m.count == 0) return m;
    m.mean_x = sx / count;
    m.mean_y = sy / count;
    double cxx = 0, cyy = 0, cxy = 0;
    const double mx = m.mean_x;
    const double my = m.mean_y;
#pragma omp parallel for reduction(+ : cxx, cyy, cxy) schedule(static) if (par)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            const double dx = x - mx;
            const double dy = y - my;
            cxx += dx * dx;
            cyy += dy * dy;
            cxy += dx * dy;
        }
    }
    m.cxx = cxx / count;
    m.cyy = cyy / count;
    m.cxy = cxy / count;
    return m;
}

HandMask dilate(const HandMask& mask, int radius) {
    require(radius >= 0, "dilation radius must be non-negative");
    if (radius == 0) return mask;
    const int w = mask.width;
    const int h = mask.height;
    const bool par = static_cast<long>(w) * h > kParallelThreshold;
    HandMask rows(w, h);
#pragma omp parallel for schedule(static) if (par)
    for (int y = 0; y < h; ++y) {
        // distance to the nearest set pixel on the left, then scan right
        int last = -(radius + 1) - 1;
        for (int x = 0; x < w; ++x) {
            if (mask.at(x, y)) last = x;
            if (x - last <= radius) rows.at(x, y) = 1;
        }
        last = w + radius + 1;
        for (int x = w - 1; x >= 0; --x) {
            if (mask.at(x, y)) last = x;
            if (last - x <= radius) rows.at(x, y) = 1;
        }
    }
    HandMask out(w, h);
#pragma omp parallel for schedule(static) if (par)
    for (int x = 0; x < w; ++x) {
        int last = -(radius + 1) - 1;
        for (int y = 0; y < h; ++y) {
            if (rows.at(x, y)) last = y;
            if (y - last <= radius) out.at(x, y) = 1;
        }
        last = h + radius + 1;
        for (int y = h - 1; y >= 0; --y) {
            if (rows.at(x, y)) last = y;
            if (last - y <= radius) out.at(x, y) = 1;
        }
    }
    return out;
}

void residual_profile(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k, const RayGrid& grid,
                      const HandMask* skip, std::span<double> out) {
    require(out.size() >= grid.count, "residual buffer too small");
    const long n = static_cast<long>(grid.count);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
    for (long i = 0; i < n; ++i) {
        out[i] = detail::residual_at(ray, depth, k, grid.t0 + static_cast<double>(i) * grid.step, skip);
    }
}

}  // namespace clarifier::kernels
