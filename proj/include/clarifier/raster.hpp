#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clarifier/error.hpp"

namespace clarifier {

/// Row-major 2D buffer. Pixel (x, y) lives at data[y * width + x].
template <typename T>
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Raster() = default;
    Raster(int w, int h, T fill = T{})
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        require(w >= 0 && h >= 0, "raster dimensions must be non-negative");
    }

    bool empty() const noexcept { return data.empty(); }
    std::size_t size() const noexcept { return data.size(); }
    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width && y < height; }

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::span<T> row(int y) { return {data.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)}; }
    std::span<const T> row(int y) const {
        return {data.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
    }

    bool operator==(const Raster&) const = default;
};

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB frame. `source` remembers the file it was loaded from so file-mode
/// providers can locate sidecar assets next to it.
struct RgbImage : Raster<Rgb> {
    using Raster<Rgb>::Raster;
    std::string source;
};

/// Grayscale intensities on the 0..255 scale.
using GrayImage = Raster<double>;

enum class DepthScale { Metric, Relative };

/// Per-pixel depth along the camera z axis. Values are finite and >= 0.
struct DepthMap : Raster<double> {
    using Raster<double>::Raster;
    DepthScale scale = DepthScale::Metric;

    void validate() const;
    /// (max - min) over all pixels; 0 for an empty map.
    double range() const;
};

/// Binary hand/forearm raster, 1 = hand.
using HandMask = Raster<std::uint8_t>;

std::size_t mask_area(const HandMask& mask);

/// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
GrayImage to_gray(const RgbImage& image);

struct BBox;
GrayImage crop(const GrayImage& image, const BBox& box);
RgbImage crop(const RgbImage& image, const BBox& box);

}  // namespace clarifier
