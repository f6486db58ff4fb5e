#pragma once

// JSON mappings for the public value types. Field names are the wire names
// used by the HTTP API, the CLI outputs and the asset sidecars.

#include <json.hpp>

#include "clarifier/assets.hpp"
#include "clarifier/geometry.hpp"
#include "clarifier/hand_pointing.hpp"
#include "clarifier/vision_quality.hpp"

namespace clarifier {

using json = nlohmann::json;

void to_json(json& j, const Point2& p);
void from_json(const json& j, Point2& p);
void to_json(json& j, const Point3& p);
void from_json(const json& j, Point3& p);
void to_json(json& j, const BBox& b);  // [x_min, y_min, x_max, y_max]
void from_json(const json& j, BBox& b);
void to_json(json& j, const Ray3& r);
void to_json(json& j, const CameraIntrinsics& k);
void from_json(const json& j, CameraIntrinsics& k);
void to_json(json& j, const IntersectionResult& r);
void to_json(json& j, const PointingEstimate& p);
void to_json(json& j, const ClarityReport& c);
void to_json(json& j, const FramingReport& f);
void to_json(json& j, const GuidanceMessage& g);
void to_json(json& j, const TargetAssessment& a);
void to_json(json& j, const DetectionResult& d);
void from_json(const json& j, DetectionResult& d);
void to_json(json& j, const CastConfig& c);
void from_json(const json& j, CastConfig& c);
void to_json(json& j, const RoiConfig& c);
void from_json(const json& j, RoiConfig& c);
void to_json(json& j, const QualityConfig& c);
void from_json(const json& j, QualityConfig& c);
void to_json(json& j, const PointingConfig& c);
void from_json(const json& j, PointingConfig& c);

json directions_to_json(const DirectionSet& s);
DirectionSet directions_from_json(const json& j);

}  // namespace clarifier
