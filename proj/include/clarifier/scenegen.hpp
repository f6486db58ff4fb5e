#pragma once

// Procedural scenes with closed-form ground truth: a fronto-parallel wall,
// an optional receding table, textured box targets and an optional pointing
// gesture. Every depth value is affine in image coordinates within its
// surface, so bilinear sampling reproduces the analytic depth exactly away
// from surface boundaries.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "clarifier/assets.hpp"
#include "clarifier/geometry.hpp"
#include "clarifier/raster.hpp"
#include "clarifier/vision_quality.hpp"

namespace clarifier::scenegen {

using json = nlohmann::json;

/// mt19937_64 with hand-rolled conversions so streams match across standard
/// libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi);  // inclusive
    double normal();

private:
    std::mt19937_64 engine_;
};

enum class Texture { Flat, Checker, Noise };

std::string_view to_string(Texture t);
Texture texture_from_string(std::string_view s);

struct TargetSpec {
    std::string label;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel rect, exclusive max
    double depth = 1.0;
    Texture texture = Texture::Checker;
    int period = 12;  // checker cell size, px
    std::array<std::uint8_t, 3> color_a{200, 60, 40};
    std::array<std::uint8_t, 3> color_b{30, 30, 30};
    double score = 0.9;  // detector confidence written to the sidecar

    BBox box() const { return {double(x0), double(y0), double(x1), double(y1)}; }
};

/// Depth rises from `near_depth` at the bottom row to the wall depth at
/// `top_row`; rows above it show the wall. Depth is affine in the row index,
/// which is what a monocular estimator's output looks like for a receding
/// floor; it is not a true 3D plane.
struct TableSpec {
    int top_row = 360;
    double near_depth = 1.0;
};

struct GestureSpec {
    Point2 tip;         // fingertip pixel
    Point2 aim;         // pixel the finger points at
    double tip_depth = 0.5;
    double finger_length = 0.08;  // tip3 to base3, scene units
    double radius_px = 8.0;
};

struct SceneSpec {
    std::uint64_t seed = 0;
    int width = 640;
    int height = 480;
    double hfov_deg = 70.0;
    double wall_depth = 3.0;
    std::optional<TableSpec> table;
    std::vector<TargetSpec> targets;
    std::optional<GestureSpec> gesture;
    double depth_noise_sigma = 0.0;

    void validate() const;
};

struct GroundTruth {
    bool has_gesture = false;
    Point2 pixel;
    Point3 point3;
    double t = 0.0;  // along the planted ray
    Ray3 ray;
    Point3 tip3;
    Point3 base3;
    std::optional<int> target_index;  // target the aim pixel lies on
    std::optional<BBox> target_bbox;
    std::string target_label;
    std::vector<GuidanceMessage> expected_guidance;  // framing rules, sharp capture assumed
};

struct SceneBundle {
    SceneSpec spec;
    std::string id;
    RgbImage image;
    DepthMap depth;
    HandMask mask;
    CameraIntrinsics k;
    std::vector<DetectionResult> detections;
    GroundTruth gt;
};

/// Random but valid spec; about a quarter have no targets (planes only).
/// Gesture specs are resampled from the same stream until the planted ray's
/// first analytic surface is the aimed one.
SceneSpec random_spec(std::uint64_t seed);

SceneBundle generate(const SceneSpec& spec);

/// Analytic depth of the noiseless scene at a pixel (hand excluded).
double analytic_depth(const SceneSpec& spec, const Point2& p);

/// Writes image.png, depth.pfm, mask.png, intrinsics.json, detections.json,
/// scene.json, gt.json and spec.json.
void write_bundle(const SceneBundle& bundle, const std::filesystem::path& dir);

/// Exhaustive reference for cast_ray: residuals at step/100 over
/// [t_min, t_max], first tolerated negative-to-positive crossing, else the
/// tolerated global minimum of |r|. Shares no code with cast_ray.
IntersectionResult brute_force_intersection(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k,
                                            const CastConfig& cfg, const HandMask* hand = nullptr);

/// Separable Gaussian blur per sigma; sigma 0 returns the input unchanged.
std::vector<RgbImage> gen_blur_series(const RgbImage& image, const std::vector<double>& sigmas);

/// Textured image filling most of the frame, for clarity fixtures.
RgbImage texture_fixture(std::uint64_t seed, int width = 320, int height = 240);

json spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(const json& j);
json gt_to_json(const GroundTruth& gt);

}  // namespace clarifier::scenegen
