#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clarifier/geometry.hpp"
#include "clarifier/raster.hpp"

namespace clarifier {

struct DetectionResult {
    std::string label;
    BBox bbox;
    double score = 0.0;
};

namespace assets {

namespace fs = std::filesystem;

RgbImage load_image(const fs::path& path);
void save_image(const RgbImage& image, const fs::path& path);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_image(const std::vector<std::uint8_t>& bytes);

/// 8-bit masks: any value > 127 is hand.
HandMask load_mask(const fs::path& path);
void save_mask(const HandMask& mask, const fs::path& path);
std::vector<std::uint8_t> encode_mask_png(const HandMask& mask);
HandMask decode_mask(const std::vector<std::uint8_t>& bytes);

/// Metadata accompanying a 16-bit depth PNG: depth = raw * scale + offset.
struct DepthSidecar {
    double scale = 0.001;
    double offset = 0.0;
    DepthScale kind = DepthScale::Metric;
};

/// Loads a portable float map (.pfm) or a 16-bit PNG. PNGs need a sidecar;
/// when `sidecar` is empty the loader looks for `<stem>.json` beside the file.
DepthMap load_depth(const fs::path& path, std::optional<DepthSidecar> sidecar = std::nullopt,
                    DepthScale pfm_kind = DepthScale::Metric);
void save_depth_pfm(const DepthMap& depth, const fs::path& path);
void save_depth_png16(const DepthMap& depth, const fs::path& path, const DepthSidecar& sidecar);

CameraIntrinsics load_intrinsics(const fs::path& path);
void save_intrinsics(const CameraIntrinsics& k, const fs::path& path);

std::vector<DetectionResult> load_detections(const fs::path& path);
void save_detections(const std::vector<DetectionResult>& detections, const fs::path& path);

/// Resolved file layout of one scene directory. `scene.json` (optional)
/// names the files; otherwise the conventional names are used.
struct SceneFiles {
    fs::path dir;
    std::string id;
    fs::path image;
    fs::path depth;
    std::optional<DepthSidecar> depth_sidecar;
    DepthScale depth_kind = DepthScale::Metric;
    std::optional<fs::path> mask;
    std::optional<fs::path> intrinsics;
    std::optional<fs::path> detections;
    double hfov_deg = 70.0;
};

/// Accepts a scene directory or the path of the scene's image.
SceneFiles locate_scene(const fs::path& dir_or_image);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace assets
}  // namespace clarifier
