#include "clarifier/latency.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

#include "clarifier/assets.hpp"
#include "clarifier/hand_pointing.hpp"
#include "clarifier/serialize.hpp"
#include "clarifier/service.hpp"

namespace clarifier {

namespace {

using Clock = std::chrono::steady_clock;

struct Accumulator {
    std::map<std::string, std::pair<double, int>> sums;
    bool recording = false;

    template <typename F>
    auto time(const std::string& stage, F&& f) {
        const auto start = Clock::now();
        auto result = f();
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        if (recording) {
            sums[stage].first += ms;
            sums[stage].second += 1;
        }
        return result;
    }

    LatencyRow row(const std::string& stage) const {
        auto it = sums.find(stage);
        if (it == sums.end() || it->second.second == 0) return {stage, 0.0, 0};
        return {stage, it->second.first / it->second.second, it->second.second};
    }
};

const char* kImageIo = "Image I/O";
const char* kDetection = "Detection";
const char* kFeedback = "Feedback generation";
const char* kVisualization = "Visualization (optional)";
const char* kDepth = "Depth estimation";
const char* kPose = "Pose detection";
const char* kHand = "Hand segmentation";
const char* kFusion = "2D-3D pointing fusion";
const char* kRay = "Ray intersection";
const char* kLlm = "LLM processing";

void run_frame(const std::filesystem::path& dir, const Providers& p, const LatencyConfig& cfg, Accumulator& acc) {
    const auto files = assets::locate_scene(dir);
    std::string label = "object";
    if (files.detections) {
        const auto dets = assets::load_detections(*files.detections);
        if (!dets.empty()) label = dets.front().label;
    }

    // Image-based clarifier.
    const RgbImage image = acc.time(kImageIo, [&] { return assets::load_image(files.image); });
    const auto found = acc.time(kDetection, [&] { return detect(*p.detector, image, label); });
    std::optional<BBox> box;
    if (!found.empty()) box = clamp_to_image(found.front().bbox, {image.width, image.height});
    const auto assessment = acc.time(kFeedback, [&] { return assess_target(image, box, cfg.pipeline.quality); });
    (void)assessment;

    // Cross-modal clarifier.
    const DepthMap depth = acc.time(kDepth, [&] { return p.depth->estimate(image); });
    const HandMask mask = acc.time(kHand, [&] { return p.handseg->segment(image); });
    if (mask_area(mask) == 0) return;
    QueryBundle b;
    b.text = cfg.query;
    b.image = std::make_shared<const RgbImage>(image);
    const CameraIntrinsics k = resolve_intrinsics(b, cfg.pipeline);
    const FingerAxis axis = acc.time(kPose, [&] { return extract_finger_keypoints(mask, cfg.pipeline.pointing); });
    const PointingEstimate pe = acc.time(kFusion, [&] {
        return estimate_pointing(mask, depth, k, cfg.pipeline.pointing,
                                 [&](const HandMask&) { return std::optional<FingerAxis>(axis); });
    });
    const CastConfig cast =
        cast_config_for(pe, depth.scale == DepthScale::Relative ? cfg.pipeline.cast_relative : cfg.pipeline.cast);
    GroundingResult g;
    g.pointing = pe;
    g.hit = acc.time(kRay, [&] { return cast_ray(pe.ray, depth, k, cast, &mask); });
    g.hand = mask_bbox(mask);
    if (g.hit.hit()) {
        g.target = target_roi(g.hit, k, cfg.pipeline.roi);
        g.context = context_crop(g.target, g.hand, k.size());
    }
    const RgbImage overlay = acc.time(kVisualization, [&] { return service::draw_ray_overlay(image, g, k); });
    (void)overlay;
    if (g.hit.hit() && p.vlm) {
        try {
            const RgbImage view = crop(image, g.context);
            acc.time(kLlm, [&] { return ground_crop_answer(*p.vlm, view, cfg.query, files.id); });
        } catch (const Error& e) {
            spdlog::warn("LLM stage skipped for {}: {}", files.id, e.what());
        }
    }
}

}  // namespace

std::string LatencyTable::markdown() const {
    std::ostringstream os;
    if (!title.empty()) os << title << "\n\n";
    os << "| Stage | Avg. latency (ms) |\n|---|---|\n";
    os << std::fixed << std::setprecision(2);
    for (const auto& r : rows) {
        os << "| " << r.stage << " | ";
        if (r.frames > 0) {
            os << r.avg_ms;
        } else {
            os << "n/a";
        }
        os << " |\n";
    }
    return os.str();
}

json LatencyTable::to_json() const {
    json rs = json::array();
    for (const auto& r : rows) {
        rs.push_back({{"stage", r.stage}, {"avg_ms", r.frames > 0 ? json(r.avg_ms) : json(nullptr)}, {"frames", r.frames}});
    }
    return json{{"title", title}, {"rows", rs}};
}

json LatencyReport::to_json() const {
    return json{{"image_based", image_based.to_json()},
                {"cross_modal", cross_modal.to_json()},
                {"geometric_ms_per_frame", geometric_ms_per_frame},
                {"frames", frames}};
}

LatencyReport bench_latency(const std::vector<std::filesystem::path>& scenes, const Providers& providers,
                            const LatencyConfig& cfg) {
    require(!scenes.empty(), "latency benchmark needs at least one scene");
    require(cfg.warmup >= 0, "warmup must be non-negative");
    Accumulator acc;
    for (int i = 0; i < cfg.warmup; ++i) run_frame(scenes[static_cast<std::size_t>(i) % scenes.size()], providers, cfg, acc);
    acc.recording = true;
    for (const auto& s : scenes) run_frame(s, providers, cfg, acc);

    LatencyReport r;
    r.frames = static_cast<int>(scenes.size());
    r.image_based.title = "Per-stage latency, image-based clarifier";
    for (const char* s : {kImageIo, kDetection, kFeedback, kVisualization}) r.image_based.rows.push_back(acc.row(s));
    r.cross_modal.title = "Per-stage latency, cross-modal clarifier";
    for (const char* s : {kDepth, kPose, kHand, kFusion, kRay, kLlm}) r.cross_modal.rows.push_back(acc.row(s));
    for (const char* s : {kPose, kFusion, kRay}) r.geometric_ms_per_frame += acc.row(s).avg_ms;
    return r;
}

}  // namespace clarifier
