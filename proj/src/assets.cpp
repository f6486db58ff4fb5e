#include "clarifier/assets.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include "clarifier/serialize.hpp"

namespace clarifier::assets {

namespace {

[[noreturn]] void missing(const fs::path& path) {
    fail(ErrorCode::MissingAsset, "asset not found: " + path.string());
}

cv::Mat read_mat(const fs::path& path, int flags) {
    if (!fs::exists(path)) missing(path);
    cv::Mat m = cv::imread(path.string(), flags);
    if (m.empty()) fail(ErrorCode::MalformedAsset, "cannot decode image: " + path.string());
    return m;
}

void write_mat(const cv::Mat& m, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) fail(ErrorCode::MalformedAsset, "cannot write image: " + path.string());
}

RgbImage from_bgr(const cv::Mat& m) {
    cv::Mat bgr = m;
    if (m.channels() == 1) cv::merge(std::vector<cv::Mat>{m, m, m}, bgr);
    if (bgr.channels() == 4) {
        std::vector<cv::Mat> ch;
        cv::split(bgr, ch);
        ch.pop_back();
        cv::merge(ch, bgr);
    }
    if (bgr.depth() != CV_8U) fail(ErrorCode::MalformedAsset, "expected an 8-bit image");
    RgbImage out(bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) out.at(x, y) = {row[x][2], row[x][1], row[x][0]};
    }
    return out;
}

cv::Mat to_bgr(const RgbImage& image) {
    cv::Mat m(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            const auto& p = image.at(x, y);
            row[x] = {p[2], p[1], p[0]};
        }
    }
    return m;
}

HandMask mask_from_mat(const cv::Mat& m) {
    if (m.channels() != 1 || m.depth() != CV_8U) fail(ErrorCode::MalformedAsset, "hand mask must be 8-bit single channel");
    HandMask out(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < m.cols; ++x) out.at(x, y) = row[x] > 127 ? 1 : 0;
    }
    return out;
}

cv::Mat mask_to_mat(const HandMask& mask) {
    cv::Mat m(mask.height, mask.width, CV_8UC1);
    for (int y = 0; y < mask.height; ++y) {
        auto* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(x, y) ? 255 : 0;
    }
    return m;
}

std::vector<std::uint8_t> encode(const cv::Mat& m) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", m, out)) fail(ErrorCode::MalformedAsset, "PNG encoding failed");
    return out;
}

cv::Mat decode(const std::vector<std::uint8_t>& bytes, int flags) {
    if (bytes.empty()) fail(ErrorCode::MalformedAsset, "empty image payload");
    cv::Mat m = cv::imdecode(bytes, flags);
    if (m.empty()) fail(ErrorCode::MalformedAsset, "cannot decode image payload");
    return m;
}

DepthScale parse_kind(const std::string& s) {
    if (s == "metric") return DepthScale::Metric;
    if (s == "relative") return DepthScale::Relative;
    fail(ErrorCode::MalformedAsset, "unknown depth kind: " + s);
}

std::string kind_name(DepthScale k) { return k == DepthScale::Metric ? "metric" : "relative"; }

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedAsset, "malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

RgbImage load_image(const fs::path& path) {
    auto out = from_bgr(read_mat(path, cv::IMREAD_COLOR));
    out.source = path.string();
    return out;
}

void save_image(const RgbImage& image, const fs::path& path) { write_mat(to_bgr(image), path); }

std::vector<std::uint8_t> encode_png(const RgbImage& image) { return encode(to_bgr(image)); }

RgbImage decode_image(const std::vector<std::uint8_t>& bytes) { return from_bgr(decode(bytes, cv::IMREAD_COLOR)); }

HandMask load_mask(const fs::path& path) { return mask_from_mat(read_mat(path, cv::IMREAD_GRAYSCALE)); }

void save_mask(const HandMask& mask, const fs::path& path) { write_mat(mask_to_mat(mask), path); }

std::vector<std::uint8_t> encode_mask_png(const HandMask& mask) { return encode(mask_to_mat(mask)); }

HandMask decode_mask(const std::vector<std::uint8_t>& bytes) { return mask_from_mat(decode(bytes, cv::IMREAD_GRAYSCALE)); }

DepthMap load_depth(const fs::path& path, std::optional<DepthSidecar> sidecar, DepthScale pfm_kind) {
    const cv::Mat m = read_mat(path, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    DepthMap out(m.cols, m.rows);
    if (m.depth() == CV_32F) {
        cv::Mat single = m;
        if (m.channels() == 3) cv::extractChannel(m, single, 0);
        for (int y = 0; y < m.rows; ++y) {
            const auto* row = single.ptr<float>(y);
            for (int x = 0; x < m.cols; ++x) out.at(x, y) = row[x];
        }
        out.scale = pfm_kind;
    } else if (m.depth() == CV_16U && m.channels() == 1) {
        if (!sidecar) {
            auto side = path;
            side.replace_extension(".json");
            if (!fs::exists(side)) missing(side);
            const json j = read_json(side);
            DepthSidecar s;
            s.scale = j.value("scale", s.scale);
            s.offset = j.value("offset", s.offset);
            s.kind = parse_kind(j.value("kind", std::string("metric")));
            sidecar = s;
        }
        for (int y = 0; y < m.rows; ++y) {
            const auto* row = m.ptr<std::uint16_t>(y);
            for (int x = 0; x < m.cols; ++x) out.at(x, y) = row[x] * sidecar->scale + sidecar->offset;
        }
        out.scale = sidecar->kind;
    } else {
        fail(ErrorCode::MalformedAsset, "depth must be a float map or a 16-bit single-channel PNG: " + path.string());
    }
    out.validate();
    return out;
}

void save_depth_pfm(const DepthMap& depth, const fs::path& path) {
    cv::Mat m(depth.height, depth.width, CV_32FC1);
    for (int y = 0; y < depth.height; ++y) {
        auto* row = m.ptr<float>(y);
        for (int x = 0; x < depth.width; ++x) row[x] = static_cast<float>(depth.at(x, y));
    }
    write_mat(m, path);
}

void save_depth_png16(const DepthMap& depth, const fs::path& path, const DepthSidecar& sidecar) {
    require(sidecar.scale > 0.0, "depth sidecar scale must be positive");
    cv::Mat m(depth.height, depth.width, CV_16UC1);
    for (int y = 0; y < depth.height; ++y) {
        auto* row = m.ptr<std::uint16_t>(y);
        for (int x = 0; x < depth.width; ++x) {
            const double raw = std::round((depth.at(x, y) - sidecar.offset) / sidecar.scale);
            row[x] = static_cast<std::uint16_t>(std::clamp(raw, 0.0, 65535.0));
        }
    }
    write_mat(m, path);
    auto side = path;
    side.replace_extension(".json");
    write_text(side, json{{"scale", sidecar.scale}, {"offset", sidecar.offset}, {"kind", kind_name(sidecar.kind)}}.dump(2) + "\n");
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
    if (!fs::exists(path)) missing(path);
    CameraIntrinsics k;
    try {
        k = read_json(path).get<CameraIntrinsics>();
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedAsset, std::string("malformed intrinsics: ") + e.what());
    }
    k.validate();
    return k;
}

void save_intrinsics(const CameraIntrinsics& k, const fs::path& path) { write_text(path, json(k).dump(2) + "\n"); }

std::vector<DetectionResult> load_detections(const fs::path& path) {
    if (!fs::exists(path)) missing(path);
    const json j = read_json(path);
    std::vector<DetectionResult> out;
    try {
        const json& list = j.is_array() ? j : j.at("detections");
        for (const auto& item : list) out.push_back(item.get<DetectionResult>());
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedAsset, "malformed detection sidecar " + path.string() + ": " + e.what());
    }
    for (const auto& d : out) {
        if (!(d.score >= 0.0 && d.score <= 1.0) || !d.bbox.valid() || d.label.empty()) {
            fail(ErrorCode::MalformedAsset, "detection sidecar entry out of range in " + path.string());
        }
    }
    return out;
}

void save_detections(const std::vector<DetectionResult>& detections, const fs::path& path) {
    write_text(path, json{{"detections", detections}}.dump(2) + "\n");
}

SceneFiles locate_scene(const fs::path& dir_or_image) {
    SceneFiles s;
    const bool is_dir = fs::is_directory(dir_or_image);
    s.dir = is_dir ? dir_or_image : dir_or_image.parent_path();
    s.id = s.dir.filename().string();
    s.image = is_dir ? s.dir / "image.png" : dir_or_image;
    s.depth = s.dir / "depth.pfm";
    if (fs::exists(s.dir / "mask.png")) s.mask = s.dir / "mask.png";
    if (fs::exists(s.dir / "intrinsics.json")) s.intrinsics = s.dir / "intrinsics.json";
    if (fs::exists(s.dir / "detections.json")) s.detections = s.dir / "detections.json";

    const auto manifest = s.dir / "scene.json";
    if (!fs::exists(manifest)) return s;
    const json j = read_json(manifest);
    try {
        s.id = j.value("id", s.id);
        if (j.contains("image") && is_dir) s.image = s.dir / j.at("image").get<std::string>();
        if (j.contains("depth")) {
            const auto& d = j.at("depth");
            s.depth = s.dir / d.at("file").get<std::string>();
            s.depth_kind = parse_kind(d.value("kind", std::string("metric")));
            if (d.contains("scale")) {
                s.depth_sidecar = DepthSidecar{d.at("scale").get<double>(), d.value("offset", 0.0), s.depth_kind};
            }
        }
        if (j.contains("mask")) {
            s.mask.reset();
            if (!j.at("mask").is_null()) s.mask = s.dir / j.at("mask").get<std::string>();
        }
        if (j.contains("intrinsics")) s.intrinsics = s.dir / j.at("intrinsics").get<std::string>();
        if (j.contains("detections")) s.detections = s.dir / j.at("detections").get<std::string>();
        s.hfov_deg = j.value("hfov_deg", s.hfov_deg);
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedAsset, std::string("malformed scene.json: ") + e.what());
    }
    return s;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::string clean;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
    }
    if (clean.size() % 4 != 0) fail(ErrorCode::MalformedAsset, "base64 payload has invalid length");
    std::vector<std::uint8_t> out(3 * clean.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
    if (n < 0) fail(ErrorCode::MalformedAsset, "invalid base64 payload");
    std::size_t pad = 0;
    if (!clean.empty() && clean.back() == '=') ++pad;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) missing(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::MalformedAsset, "cannot write " + path.string());
    out << text;
}

}  // namespace clarifier::assets
