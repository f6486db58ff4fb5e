#include "clarifier/hand_pointing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "clarifier/kernels.hpp"

namespace clarifier {

void PointingConfig::validate() const {
    require(min_elongation >= 1.0, "min_elongation must be >= 1");
    require(base_fraction > 0.0 && base_fraction < 1.0, "base_fraction must lie in (0, 1)");
    require(refine_max_px >= 0, "refine_max_px must be non-negative");
    require(refine_tolerance > 0.0, "refine_tolerance must be positive");
}

BBox mask_bbox(const HandMask& mask) {
    int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) fail(ErrorCode::EmptyMask, "hand mask is empty");
    return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)};
}

namespace {

struct Extreme {
    Point2 pixel;
    double along = 0.0;
};

Point2 snap_into_mask(const HandMask& mask, Point2 p) {
    const int x = static_cast<int>(std::lround(p.u));
    const int y = static_cast<int>(std::lround(p.v));
    if (mask.contains(x, y) && mask.at(x, y)) return {static_cast<double>(x), static_cast<double>(y)};
    double best = std::numeric_limits<double>::infinity();
    Point2 out = p;
    for (int yy = 0; yy < mask.height; ++yy) {
        for (int xx = 0; xx < mask.width; ++xx) {
            if (!mask.at(xx, yy)) continue;
            const double d = (xx - p.u) * (xx - p.u) + (yy - p.v) * (yy - p.v);
            if (d < best) {
                best = d;
                out = {static_cast<double>(xx), static_cast<double>(yy)};
            }
        }
    }
    return out;
}

double distance_to_border(const Point2& p, int border, const HandMask& mask) {
    switch (border) {
        case 0: return p.u;                     // left
        case 1: return mask.width - 1 - p.u;    // right
        case 2: return p.v;                     // top
        default: return mask.height - 1 - p.v;  // bottom
    }
}

}  // namespace

FingerAxis extract_finger_keypoints(const HandMask& mask, const PointingConfig& cfg) {
    cfg.validate();
    const MaskMoments m = kernels::mask_moments(mask);
    if (m.count == 0) fail(ErrorCode::EmptyMask, "hand mask is empty");
    if (m.count < cfg.min_area) fail(ErrorCode::EmptyMask, "hand mask is smaller than the minimum area");

    const double half_trace = 0.5 * (m.cxx + m.cyy);
    const double disc = std::sqrt(0.25 * (m.cxx - m.cyy) * (m.cxx - m.cyy) + m.cxy * m.cxy);
    const double major = half_trace + disc;
    const double minor = half_trace - disc;
    const double elongation = minor > 1e-12 ? major / minor : std::numeric_limits<double>::max();
    if (elongation < cfg.min_elongation) fail(ErrorCode::NotElongated, "hand mask is not elongated enough to point");

    Point2 axis;
    {
        const Point2 a{m.cxy, major - m.cxx};
        const Point2 b{major - m.cyy, m.cxy};
        const double na = std::hypot(a.u, a.v);
        const double nb = std::hypot(b.u, b.v);
        if (std::max(na, nb) < 1e-12) {
            axis = m.cxx >= m.cyy ? Point2{1, 0} : Point2{0, 1};
        } else if (na >= nb) {
            axis = {a.u / na, a.v / na};
        } else {
            axis = {b.u / nb, b.v / nb};
        }
    }

    // Extremes along the axis; ties broken toward the axis line.
    Extreme lo{{}, std::numeric_limits<double>::infinity()};
    Extreme hi{{}, -std::numeric_limits<double>::infinity()};
    double lo_perp = 0, hi_perp = 0;
    std::array<std::size_t, 4> touches{};  // left, right, top, bottom
    constexpr double kTie = 1e-9;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double dx = x - m.mean_x;
            const double dy = y - m.mean_y;
            const double s = dx * axis.u + dy * axis.v;
            const double perp = std::abs(-dx * axis.v + dy * axis.u);
            const Point2 p{static_cast<double>(x), static_cast<double>(y)};
            if (s > hi.along + kTie || (s > hi.along - kTie && perp < hi_perp)) {
                hi = {p, s};
                hi_perp = perp;
            }
            if (s < lo.along - kTie || (s < lo.along + kTie && perp < lo_perp)) {
                lo = {p, s};
                lo_perp = perp;
            }
            touches[0] += x == 0;
            touches[1] += x == mask.width - 1;
            touches[2] += y == 0;
            touches[3] += y == mask.height - 1;
        }
    }

    bool tip_is_hi;
    const auto border_it = std::max_element(touches.begin(), touches.end());
    if (*border_it > 0) {
        const int border = static_cast<int>(border_it - touches.begin());
        tip_is_hi = distance_to_border(hi.pixel, border, mask) > distance_to_border(lo.pixel, border, mask);
    } else {
        // No forearm entry: the tip is the end lying deeper inside the frame.
        auto interior = [&](const Point2& p) {
            double d = std::numeric_limits<double>::infinity();
            for (int b = 0; b < 4; ++b) d = std::min(d, distance_to_border(p, b, mask));
            return d;
        };
        tip_is_hi = interior(hi.pixel) >= interior(lo.pixel);
    }

    FingerAxis out;
    out.elongation = elongation;
    out.extent = hi.along - lo.along;
    if (tip_is_hi) {
        out.tip2 = hi.pixel;
        out.axis = axis;
    } else {
        out.tip2 = lo.pixel;
        out.axis = {-axis.u, -axis.v};
    }
    const double back = cfg.base_fraction * out.extent;
    out.base2 = snap_into_mask(mask, {out.tip2.u - back * out.axis.u, out.tip2.v - back * out.axis.v});
    if (out.base2 == out.tip2) fail(ErrorCode::DegenerateFinger, "fingertip and finger base coincide in the image");
    return out;
}

TipRefinement refine_tip_with_depth(const FingerAxis& axis, const HandMask& mask, const DepthMap& depth,
                                    const PointingConfig& cfg) {
    cfg.validate();
    require(mask.width == depth.width && mask.height == depth.height, "hand mask and depth map differ in size");

    // Median depth over the distal third of the mask along the finger axis.
    double s_min = std::numeric_limits<double>::infinity();
    double s_max = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double s = x * axis.axis.u + y * axis.axis.v;
            s_min = std::min(s_min, s);
            s_max = std::max(s_max, s);
        }
    }
    if (!(s_max >= s_min)) fail(ErrorCode::EmptyMask, "hand mask is empty");
    const double cut = s_max - (s_max - s_min) / 3.0;
    std::vector<double> distal;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y) && x * axis.axis.u + y * axis.axis.v >= cut) distal.push_back(depth.at(x, y));
        }
    }
    auto mid = distal.begin() + static_cast<std::ptrdiff_t>(distal.size() / 2);
    std::nth_element(distal.begin(), mid, distal.end());
    const double median = *mid;
    const double tolerance = cfg.refine_tolerance * median;

    for (int step = 0; step <= cfg.refine_max_px; ++step) {
        const Point2 p{axis.tip2.u - step * axis.axis.u, axis.tip2.v - step * axis.axis.v};
        const auto d = sample_depth(depth, p);
        if (!d) break;
        if (std::abs(*d - median) <= tolerance) return {p, true, static_cast<double>(step)};
    }
    return {axis.tip2, false, 0.0};
}

PointingEstimate estimate_pointing(const HandMask& mask, const DepthMap& depth, const CameraIntrinsics& k,
                                   const PointingConfig& cfg, const KeypointProvider& keypoints) {
    k.validate();
    require(depth.width == k.width && depth.height == k.height, "depth map and intrinsics disagree on image size");
    std::optional<FingerAxis> axis;
    if (keypoints) axis = keypoints(mask);
    if (!axis) axis = extract_finger_keypoints(mask, cfg);

    const TipRefinement refined = refine_tip_with_depth(*axis, mask, depth, cfg);
    const auto d_tip = sample_depth(depth, refined.tip);
    const auto d_base = sample_depth(depth, axis->base2);
    if (!d_tip || !d_base || !(*d_tip > 0.0) || !(*d_base > 0.0)) {
        fail(ErrorCode::DegenerateFinger, "finger keypoints have no usable depth");
    }

    PointingEstimate out;
    out.tip2 = refined.tip;
    out.base2 = axis->base2;
    out.tip3 = unproject(out.tip2, *d_tip, k);
    out.base3 = unproject(out.base2, *d_base, k);
    out.ray = make_pointing_ray(out.tip3, out.base3, cfg.min_finger_length);
    out.elongation = axis->elongation;

    const double shape = 1.0 - std::exp(-(axis->elongation - 1.0) / 4.0);
    const double refine = refined.qualified ? 1.0 : 0.7;
    const double moved = cfg.refine_max_px > 0 ? refined.moved_px / cfg.refine_max_px : 0.0;
    out.confidence = std::clamp(shape * refine * (1.0 - 0.3 * moved), 0.0, 1.0);
    return out;
}

CastConfig cast_config_for(const PointingEstimate& pointing, CastConfig base, double margin) {
    base.t_min = (pointing.tip3 - pointing.base3).norm() + margin;
    base.t_max = std::max(base.t_max, base.t_min + base.step);
    return base;
}

}  // namespace clarifier
