#include <algorithm>
#include <cmath>
#include <limits>

#include "clarifier/kernels.hpp"
#include "kernels_common.hpp"

namespace clarifier::kernels {

std::vector<double> gaussian_taps(double sigma) {
    require(sigma > 0.0 && std::isfinite(sigma), "gaussian sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += taps[i + radius];
    }
    for (double& w : taps) w /= sum;
    return taps;
}

namespace serial {

GrayImage luma(const RgbImage& image) {
    GrayImage out(image.width, image.height);
    for (std::size_t i = 0; i < image.data.size(); ++i) out.data[i] = detail::luma_of(image.data[i]);
    return out;
}

double laplacian_variance(const GrayImage& image) {
    require(image.width >= 3 && image.height >= 3, "laplacian needs at least a 3x3 region");
    const int w = image.width;
    const int h = image.height;
    std::vector<double> response;
    response.reserve(static_cast<std::size_t>(w - 2) * (h - 2));
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            response.push_back(image.at(x, y - 1) + image.at(x - 1, y) - 4.0 * image.at(x, y) + image.at(x + 1, y) +
                               image.at(x, y + 1));
        }
    }
    double mean = 0.0;
    for (double r : response) mean += r;
    mean /= static_cast<double>(response.size());
    double var = 0.0;
    for (double r : response) var += (r - mean) * (r - mean);
    return var / static_cast<double>(response.size());
}

GrayImage gaussian_blur(const GrayImage& image, double sigma) {
    require(sigma >= 0.0, "gaussian sigma must be non-negative");
    if (sigma == 0.0 || image.empty()) return image;
    const auto taps = gaussian_taps(sigma);
    const int r = static_cast<int>(taps.size() / 2);
    GrayImage tmp(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += taps[i + r] * image.at(detail::reflect(x + i, image.width), y);
            tmp.at(x, y) = acc;
        }
    }
    GrayImage out(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += taps[i + r] * tmp.at(x, detail::reflect(y + i, image.height));
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
    for (int c = 0; c < 3; ++c) {
        GrayImage plane(image.width, image.height);
        for (std::size_t i = 0; i < plane.data.size(); ++i) plane.data[i] = image.data[i][c];
        const auto blurred = gaussian_blur(plane, sigma);
        for (std::size_t i = 0; i < plane.data.size(); ++i) out.data[i][c] = detail::to_byte(blurred.data[i]);
    }
    return out;
}

MaskMoments mask_moments(const HandMask& mask) {
    MaskMoments m;
    double sx = 0, sy = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            ++m.count;
            sx += x;
            sy += y;
        }
    }
    if (m.count == 0) return m;
    m.mean_x = sx / m.count;
    m.mean_y = sy / m.count;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double dx = x - m.mean_x;
            const double dy = y - m.mean_y;
            m.cxx += dx * dx;
            m.cyy += dy * dy;
            m.cxy += dx * dy;
        }
    }
    m.cxx /= m.count;
    m.cyy /= m.count;
    m.cxy /= m.count;
    return m;
}

HandMask dilate(const HandMask& mask, int radius) {
    require(radius >= 0, "dilation radius must be non-negative");
    HandMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            std::uint8_t v = 0;
            for (int dy = -radius; dy <= radius && !v; ++dy) {
                for (int dx = -radius; dx <= radius && !v; ++dx) {
                    if (mask.contains(x + dx, y + dy) && mask.at(x + dx, y + dy)) v = 1;
                }
            }
            out.at(x, y) = v;
        }
    }
    return out;
}

void residual_profile(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k, const RayGrid& grid,
                      const HandMask* skip, std::span<double> out) {
    require(out.size() >= grid.count, "residual buffer too small");
    for (std::size_t i = 0; i < grid.count; ++i) {
        out[i] = detail::residual_at(ray, depth, k, grid.t0 + static_cast<double>(i) * grid.step, skip);
    }
}

}  // namespace serial
}  // namespace clarifier::kernels
