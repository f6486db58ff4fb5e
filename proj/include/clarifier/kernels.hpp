#pragma once

// Data-parallel raster kernels. `clarifier::kernels` holds the OpenMP
// versions used by the library; `clarifier::kernels::serial` holds the
// straightforward single-threaded reference each one is tested against.

#include <cstddef>
#include <span>

#include "clarifier/geometry.hpp"
#include "clarifier/raster.hpp"

namespace clarifier {

struct MaskMoments {
    std::size_t count = 0;
    double mean_x = 0.0;
    double mean_y = 0.0;
    double cxx = 0.0;  // central second moments, normalised by count
    double cyy = 0.0;
    double cxy = 0.0;
};

/// Sampling grid for a marched ray: t_k = t0 + k * step, k in [0, count).
struct RayGrid {
    double t0 = 0.0;
    double step = 0.0;
    std::size_t count = 0;
};

namespace kernels {

GrayImage luma(const RgbImage& image);

/// Population variance of the 4-neighbour Laplacian over the valid region.
double laplacian_variance(const GrayImage& image);

/// Separable Gaussian, radius ceil(3 sigma), mirrored borders. sigma == 0 copies.
GrayImage gaussian_blur(const GrayImage& image, double sigma);
RgbImage gaussian_blur(const RgbImage& image, double sigma);

MaskMoments mask_moments(const HandMask& mask);

/// Chebyshev (square) dilation by `radius` pixels.
HandMask dilate(const HandMask& mask, int radius);

/// Residual depth(p(t)) - D(project(p(t))) per grid sample; NaN where the
/// sample is behind the camera, projects outside the image, or lands on `skip`.
void residual_profile(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k, const RayGrid& grid,
                      const HandMask* skip, std::span<double> out);

namespace serial {

GrayImage luma(const RgbImage& image);
double laplacian_variance(const GrayImage& image);
GrayImage gaussian_blur(const GrayImage& image, double sigma);
RgbImage gaussian_blur(const RgbImage& image, double sigma);
MaskMoments mask_moments(const HandMask& mask);
HandMask dilate(const HandMask& mask, int radius);
void residual_profile(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k, const RayGrid& grid,
                      const HandMask* skip, std::span<double> out);

}  // namespace serial

/// Normalised 1D Gaussian taps, length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_taps(double sigma);

}  // namespace kernels
}  // namespace clarifier
