#include "clarifier/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "clarifier/kernels.hpp"
#include "kernels_common.hpp"

namespace clarifier {

void CameraIntrinsics::validate() const {
    require(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
    require(width > 0 && height > 0, "image size must be positive");
    require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height, "principal point must lie inside the image");
}

CameraIntrinsics CameraIntrinsics::from_fov(int width, int height, double hfov_deg) {
    require(hfov_deg > 0.0 && hfov_deg < 180.0, "horizontal field of view must lie in (0, 180) degrees");
    const double f = 0.5 * width / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0);
    CameraIntrinsics k{f, f, 0.5 * width, 0.5 * height, width, height};
    k.validate();
    return k;
}

bool in_image(const Point2& p, int width, int height) {
    return p.u >= 0.0 && p.v >= 0.0 && p.u <= width - 1 && p.v <= height - 1;
}

BBox clamp_to_image(const BBox& box, ImageSize image) {
    BBox out{std::max(box.x_min, 0.0), std::max(box.y_min, 0.0), std::min(box.x_max, static_cast<double>(image.width)),
             std::min(box.y_max, static_cast<double>(image.height))};
    require(out.valid(), "box lies outside the image");
    return out;
}

double iou(const BBox& a, const BBox& b) {
    const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

void CastConfig::validate() const {
    require(t_min >= 0.0 && t_min < t_max, "cast config needs 0 <= t_min < t_max");
    require(step > 0.0, "cast step must be positive");
    require(tau_collision > 0.0, "tau_collision must be positive");
    require(mask_dilation_px >= 0, "mask dilation must be non-negative");
}

double CastConfig::effective_tau(const DepthMap& depth) const {
    return depth.scale == DepthScale::Relative ? tau_collision * depth.range() : tau_collision;
}

void RoiConfig::validate() const {
    require(base_side > 0.0 && ref_depth > 0.0 && depth_gain >= 0.0, "roi config needs positive base side and reference depth");
    require(min_side > 0.0 && min_side <= max_side, "roi config needs 0 < min_side <= max_side");
}

Point3 unproject(const Point2& p, double depth, const CameraIntrinsics& k) {
    require(depth > 0.0, "unproject needs a positive depth");
    require(p.u >= 0.0 && p.v >= 0.0 && p.u < k.width && p.v < k.height, "unproject point lies outside the image");
    return {(p.u - k.cx) * depth / k.fx, (p.v - k.cy) * depth / k.fy, depth};
}

Point2 project(const Point3& q, const CameraIntrinsics& k) {
    require(q.z > 0.0, "project needs a point in front of the camera");
    return {k.cx + k.fx * q.x / q.z, k.cy + k.fy * q.y / q.z};
}

std::optional<double> sample_depth(const DepthMap& depth, const Point2& p) {
    if (depth.empty() || !in_image(p, depth.width, depth.height)) return std::nullopt;
    const int x0 = std::min(static_cast<int>(p.u), std::max(depth.width - 2, 0));
    const int y0 = std::min(static_cast<int>(p.v), std::max(depth.height - 2, 0));
    const int x1 = std::min(x0 + 1, depth.width - 1);
    const int y1 = std::min(y0 + 1, depth.height - 1);
    const double ax = p.u - x0;
    const double ay = p.v - y0;
    const double top = depth.at(x0, y0) * (1.0 - ax) + depth.at(x1, y0) * ax;
    const double bottom = depth.at(x0, y1) * (1.0 - ax) + depth.at(x1, y1) * ax;
    return top * (1.0 - ay) + bottom * ay;
}

Ray3 make_pointing_ray(const Point3& tip3, const Point3& base3, double min_length) {
    const Point3 d = tip3 - base3;
    const double len = d.norm();
    if (!(len > min_length)) fail(ErrorCode::DegenerateFinger, "fingertip and finger base coincide");
    return {base3, d * (1.0 / len)};
}

IntersectionResult cast_ray(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k, const CastConfig& cfg,
                            const HandMask* hand) {
    cfg.validate();
    k.validate();
    require(std::abs(ray.dir.norm() - 1.0) <= 1e-6, "ray direction must be unit length");
    require(depth.width == k.width && depth.height == k.height, "depth map and intrinsics disagree on image size");

    HandMask grown;
    const HandMask* skip = nullptr;
    if (hand && !hand->empty()) {
        require(hand->width == depth.width && hand->height == depth.height, "hand mask and depth map differ in size");
        grown = kernels::dilate(*hand, cfg.mask_dilation_px);
        skip = &grown;
    }

    const RayGrid grid{cfg.t_min, cfg.step,
                       static_cast<std::size_t>(std::floor((cfg.t_max - cfg.t_min) / cfg.step + 1e-9)) + 1};
    std::vector<double> r(grid.count);
    kernels::residual_profile(ray, depth, k, grid, skip, r);

    const double tau = cfg.effective_tau(depth);
    auto finish = [&](double t, double residual) {
        IntersectionResult out;
        out.status = HitStatus::Hit;
        out.t = t;
        out.point3 = ray.at(t);
        out.pixel = project(out.point3, k);
        out.residual = residual;
        return out;
    };

    const double resolution = cfg.step / 100.0;
    for (std::size_t i = 0; i + 1 < grid.count; ++i) {
        if (!(r[i] < 0.0 && r[i + 1] >= 0.0)) continue;  // NaN compares false
        double lo = grid.t0 + static_cast<double>(i) * grid.step;
        double hi = lo + grid.step;
        double r_lo = r[i];
        double r_hi = r[i + 1];
        while (hi - lo > resolution) {
            const double mid = 0.5 * (lo + hi);
            const double rm = kernels::detail::residual_at(ray, depth, k, mid, nullptr);
            if (std::isnan(rm)) break;
            if (rm < 0.0) {
                lo = mid;
                r_lo = rm;
            } else {
                hi = mid;
                r_hi = rm;
            }
        }
        const bool take_lo = std::abs(r_lo) < std::abs(r_hi);
        const double t = take_lo ? lo : hi;
        const double res = take_lo ? r_lo : r_hi;
        if (std::abs(res) <= tau) return finish(t, res);
    }

    std::size_t best = grid.count;
    for (std::size_t i = 0; i < grid.count; ++i) {
        if (std::isnan(r[i]) || std::abs(r[i]) > tau) continue;
        if (best == grid.count || std::abs(r[i]) < std::abs(r[best])) best = i;
    }
    if (best < grid.count) return finish(grid.t0 + static_cast<double>(best) * grid.step, r[best]);

    return {};
}

double roi_side(double depth, const RoiConfig& cfg) {
    cfg.validate();
    const double raw = cfg.base_side * (1.0 + cfg.depth_gain * std::max(depth, 0.0) / cfg.ref_depth);
    return std::clamp(raw, cfg.min_side, cfg.max_side);
}

BBox target_roi(const IntersectionResult& hit, const CameraIntrinsics& k, const RoiConfig& cfg) {
    if (!hit.hit()) fail(ErrorCode::InvalidArgument, "target ROI needs a ray hit");
    const double half = 0.5 * roi_side(hit.point3.z, cfg);
    const BBox box{hit.pixel.u - half, hit.pixel.v - half, hit.pixel.u + half, hit.pixel.v + half};
    return clamp_to_image(box, k.size());
}

BBox context_crop(const BBox& target, const BBox& hand, ImageSize image) {
    require(target.valid() && hand.valid(), "context crop needs two valid boxes");
    const BBox hull{std::min(target.x_min, hand.x_min), std::min(target.y_min, hand.y_min),
                    std::max(target.x_max, hand.x_max), std::max(target.y_max, hand.y_max)};
    return clamp_to_image(hull, image);
}

}  // namespace clarifier
