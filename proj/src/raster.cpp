#include "clarifier/raster.hpp"

#include <algorithm>
#include <cmath>

#include "clarifier/geometry.hpp"
#include "clarifier/kernels.hpp"

namespace clarifier {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::DegenerateFinger: return "degenerate_finger";
        case ErrorCode::EmptyMask: return "empty_mask";
        case ErrorCode::NotElongated: return "not_elongated";
        case ErrorCode::ProviderError: return "provider_error";
        case ErrorCode::Timeout: return "timeout";
        case ErrorCode::AuthError: return "auth_error";
        case ErrorCode::RateLimited: return "rate_limited";
        case ErrorCode::UnknownScriptKey: return "unknown_script_key";
        case ErrorCode::NoEntity: return "no_entity";
        case ErrorCode::MissingAsset: return "missing_asset";
        case ErrorCode::MalformedAsset: return "malformed_asset";
        case ErrorCode::UnparseableAnalysis: return "unparseable_analysis";
        case ErrorCode::UserAbort: return "user_abort";
        case ErrorCode::NotFound: return "not_found";
    }
    return "unknown";
}

bool Error::is_provider_fault() const noexcept {
    switch (code_) {
        case ErrorCode::ProviderError:
        case ErrorCode::Timeout:
        case ErrorCode::AuthError:
        case ErrorCode::RateLimited:
        case ErrorCode::UnknownScriptKey:
        case ErrorCode::UnparseableAnalysis:
            return true;
        default:
            return false;
    }
}

void DepthMap::validate() const {
    require(data.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
            "depth map size does not match its dimensions");
    for (double v : data) {
        if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::MalformedAsset, "depth map holds a negative or non-finite value");
    }
}

double DepthMap::range() const {
    if (data.empty()) return 0.0;
    auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    return *hi - *lo;
}

std::size_t mask_area(const HandMask& mask) {
    return static_cast<std::size_t>(std::count_if(mask.data.begin(), mask.data.end(), [](auto b) { return b != 0; }));
}

GrayImage to_gray(const RgbImage& image) { return kernels::luma(image); }

namespace {

struct PixelSpan {
    int x0, y0, x1, y1;
};

PixelSpan pixel_span(const BBox& box, int width, int height) {
    PixelSpan s{static_cast<int>(std::floor(box.x_min)), static_cast<int>(std::floor(box.y_min)),
                static_cast<int>(std::ceil(box.x_max)), static_cast<int>(std::ceil(box.y_max))};
    s.x0 = std::clamp(s.x0, 0, width);
    s.x1 = std::clamp(s.x1, 0, width);
    s.y0 = std::clamp(s.y0, 0, height);
    s.y1 = std::clamp(s.y1, 0, height);
    require(s.x1 > s.x0 && s.y1 > s.y0, "crop box does not overlap the image");
    return s;
}

template <typename Out, typename In>
Out crop_impl(const In& image, const BBox& box) {
    const auto s = pixel_span(box, image.width, image.height);
    Out out(s.x1 - s.x0, s.y1 - s.y0);
    for (int y = s.y0; y < s.y1; ++y) {
        auto src = image.row(y);
        std::copy(src.begin() + s.x0, src.begin() + s.x1, out.row(y - s.y0).begin());
    }
    return out;
}

}  // namespace

GrayImage crop(const GrayImage& image, const BBox& box) { return crop_impl<GrayImage>(image, box); }

RgbImage crop(const RgbImage& image, const BBox& box) {
    auto out = crop_impl<RgbImage>(image, box);
    out.source = image.source;
    return out;
}

}  // namespace clarifier
