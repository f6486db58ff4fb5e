#pragma once

#include <cmath>
#include <optional>

#include "clarifier/raster.hpp"

namespace clarifier {

struct Point2 {
    double u = 0.0;
    double v = 0.0;
    bool operator==(const Point2&) const = default;
};

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    bool operator==(const Point3&) const = default;
};

struct ImageSize {
    int width = 0;
    int height = 0;
};

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;
    ImageSize size() const { return {width, height}; }

    /// Square pixels, principal point at the image center, focal length from
    /// the horizontal field of view.
    static CameraIntrinsics from_fov(int width, int height, double hfov_deg = 70.0);
};

/// True when (u, v) lies in the bilinearly sampleable area [0, w-1] x [0, h-1].
bool in_image(const Point2& p, int width, int height);

struct Ray3 {
    Point3 origin;
    Point3 dir;  // unit length
    Point3 at(double t) const { return origin + dir * t; }
};

/// Axis-aligned pixel box with continuous coordinates; x_max/y_max are exclusive.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_min < x_max && y_min < y_max; }
    bool contains(const BBox& other) const {
        return other.x_min >= x_min && other.y_min >= y_min && other.x_max <= x_max && other.y_max <= y_max;
    }
    bool contains(const Point2& p) const { return p.u >= x_min && p.u < x_max && p.v >= y_min && p.v < y_max; }
    bool operator==(const BBox&) const = default;
};

BBox clamp_to_image(const BBox& box, ImageSize image);
double iou(const BBox& a, const BBox& b);

enum class HitStatus { Hit, Miss };

struct IntersectionResult {
    HitStatus status = HitStatus::Miss;
    Point3 point3;
    Point2 pixel;
    double residual = 0.0;  // depth(p) - D(p_xy) at the returned point
    double t = 0.0;

    bool hit() const { return status == HitStatus::Hit; }
};

struct CastConfig {
    double t_min = 0.0;
    double t_max = 20.0;
    double step = 0.01;
    /// Absolute for metric maps; a fraction of the depth range for relative maps.
    double tau_collision = 0.05;
    /// Radius (px) by which the hand mask is grown before masking samples.
    int mask_dilation_px = 3;

    void validate() const;
    /// Threshold in scene units for the given map.
    double effective_tau(const DepthMap& depth) const;

    static CastConfig relative_default() {
        CastConfig cfg;
        cfg.tau_collision = 0.03;
        return cfg;
    }
};

struct RoiConfig {
    double base_side = 100.0;  // s0
    double depth_gain = 1.0;   // k
    double ref_depth = 2.0;    // d_ref
    double min_side = 48.0;
    double max_side = 480.0;

    void validate() const;
};

/// Pixel plus depth to a camera-frame point.
Point3 unproject(const Point2& p, double depth, const CameraIntrinsics& k);
Point2 project(const Point3& q, const CameraIntrinsics& k);

/// Bilinear depth lookup; std::nullopt outside the sampleable area.
std::optional<double> sample_depth(const DepthMap& depth, const Point2& p);

inline constexpr double kDefaultMinFingerLength = 1e-4;

/// Ray from the finger base through the fingertip.
Ray3 make_pointing_ray(const Point3& tip3, const Point3& base3, double min_length = kDefaultMinFingerLength);

/// Marches the ray over [t_min, t_max]. The first negative-to-positive
/// residual crossing within tolerance wins and is refined by bisection to
/// step/100; otherwise the constrained global argmin of |residual| among the
/// marched samples; otherwise a miss. `hand` (optional) masks out samples that
/// project onto the dilated hand.
IntersectionResult cast_ray(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k, const CastConfig& cfg,
                            const HandMask* hand = nullptr);

/// Side length of the depth-scaled target box before clamping to the image.
double roi_side(double depth, const RoiConfig& cfg);

/// Square box around the hit pixel whose side grows with hit depth.
BBox target_roi(const IntersectionResult& hit, const CameraIntrinsics& k, const RoiConfig& cfg);

/// Smallest box enclosing both inputs, clamped to the image.
BBox context_crop(const BBox& target, const BBox& hand, ImageSize image);

}  // namespace clarifier
