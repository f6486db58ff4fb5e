#pragma once

#include <functional>
#include <optional>

#include "clarifier/geometry.hpp"

namespace clarifier {

struct FingerAxis {
    Point2 tip2;
    Point2 base2;
    Point2 axis;  // unit vector from the forearm side toward the fingertip
    double elongation = 1.0;
    double extent = 0.0;  // mask extent along the axis, px
};

struct PointingConfig {
    std::size_t min_area = 50;     // A_min, px
    double min_elongation = 1.8;   // e_min, ratio of principal eigenvalues
    double base_fraction = 0.35;   // lambda, fraction of the axial extent
    int refine_max_px = 15;        // N
    double refine_tolerance = 0.05;  // epsilon_fg, fraction of the finger median depth
    double min_finger_length = kDefaultMinFingerLength;

    void validate() const;
};

struct TipRefinement {
    Point2 tip;
    bool qualified = true;   // false when no inward sample reached finger depth
    double moved_px = 0.0;
};

struct PointingEstimate {
    Point2 tip2;
    Point2 base2;
    Point3 tip3;
    Point3 base3;
    Ray3 ray;
    double confidence = 0.0;
    double elongation = 1.0;
};

/// Optional override for the mask-geometry keypoints (e.g. a pose model).
using KeypointProvider = std::function<std::optional<FingerAxis>(const HandMask&)>;

/// Principal axis of the mask from second moments. The tip is the mask pixel
/// with the largest projection along the axis, oriented away from the image
/// border the forearm enters through.
FingerAxis extract_finger_keypoints(const HandMask& mask, const PointingConfig& cfg = {});

/// Walks inward from the tip along the axis until the depth matches the
/// median depth of the mask's distal third. Never moves outward; never moves
/// more than refine_max_px.
TipRefinement refine_tip_with_depth(const FingerAxis& axis, const HandMask& mask, const DepthMap& depth,
                                    const PointingConfig& cfg = {});

PointingEstimate estimate_pointing(const HandMask& mask, const DepthMap& depth, const CameraIntrinsics& k,
                                   const PointingConfig& cfg = {}, const KeypointProvider& keypoints = {});

/// Tight pixel box around the set mask pixels.
BBox mask_bbox(const HandMask& mask);

/// Ray-march settings that start just past the fingertip.
CastConfig cast_config_for(const PointingEstimate& pointing, CastConfig base, double margin = 0.02);

}  // namespace clarifier
