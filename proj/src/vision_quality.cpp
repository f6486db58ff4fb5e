#include "clarifier/vision_quality.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>

#include "clarifier/kernels.hpp"

namespace clarifier {

void QualityConfig::validate() const {
    require(tau_small > 0.0 && tau_small < tau_large && tau_large <= 1.0, "need 0 < tau_small < tau_large <= 1");
    require(delta_edge >= 0.0 && delta_edge < 0.5, "delta_edge must lie in [0, 0.5)");
    require(tau_blur >= 0.0 && tau_blur <= 1.0, "tau_blur must lie in [0, 1]");
    require(w_lap >= 0.0 && w_fft >= 0.0 && std::abs(w_lap + w_fft - 1.0) <= 1e-9, "clarity weights must be >= 0 and sum to 1");
    require(lap_lo < lap_hi && fft_lo < fft_hi, "normalisation bounds need lo < hi");
    require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
}

double QualityConfig::edge_margin_px(ImageSize image) const {
    return delta_edge * std::min(image.width, image.height);
}

double laplacian_variance(const GrayImage& roi) { return kernels::laplacian_variance(roi); }

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

double fft_highfreq_ratio(const GrayImage& roi, double rho) {
    require(roi.width >= 8 && roi.height >= 8, "FFT ratio needs at least an 8x8 region");
    require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
    const int h = roi.height;
    const int w = roi.width;
    const int wc = w / 2 + 1;

    std::vector<double> in(roi.data);
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(h) * wc));
    if (!out) throw std::bad_alloc();
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_2d(h, w, in.data(), out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);

    const double radius = rho * std::min(h, w) / 2.0;
    double total = 0.0;
    double high = 0.0;
    for (int ky = 0; ky < h; ++ky) {
        const double fy = ky <= h / 2 ? ky : ky - h;
        for (int kx = 0; kx < wc; ++kx) {
            if (ky == 0 && kx == 0) continue;
            // Columns not stored by the r2c transform mirror the stored ones.
            const double weight = (kx == 0 || (w % 2 == 0 && kx == w / 2)) ? 1.0 : 2.0;
            const auto& c = out[static_cast<std::size_t>(ky) * wc + kx];
            const double e = weight * (c[0] * c[0] + c[1] * c[1]);
            total += e;
            if (std::hypot(fy, static_cast<double>(kx)) > radius) high += e;
        }
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(out);

    // Relative guard: round-off leaves tiny non-DC energy in constant images.
    double dc = 0.0;
    for (double v : roi.data) dc += v;
    const double scale = dc * dc + 1.0;
    if (total <= 1e-20 * scale) return 0.0;
    return std::clamp(high / total, 0.0, 1.0);
}

double normalize(double x, double lo, double hi) { return std::clamp((x - lo) / (hi - lo), 0.0, 1.0); }

double clarity_score(double c_lap, double c_fft, const QualityConfig& cfg) {
    cfg.validate();
    const double s = cfg.w_lap * normalize(c_lap, cfg.lap_lo, cfg.lap_hi) + cfg.w_fft * normalize(c_fft, cfg.fft_lo, cfg.fft_hi);
    return std::clamp(s, 0.0, 1.0);
}

ClarityReport assess_clarity(const GrayImage& roi, const QualityConfig& cfg) {
    ClarityReport r;
    r.c_lap = laplacian_variance(roi);
    r.c_fft = fft_highfreq_ratio(roi, cfg.rho);
    r.score = clarity_score(r.c_lap, r.c_fft, cfg);
    return r;
}

FramingReport assess_framing(const BBox& box, ImageSize image, const QualityConfig& cfg) {
    cfg.validate();
    require(box.valid(), "framing needs a valid box");
    require(image.width > 0 && image.height > 0, "framing needs a non-empty image");
    FramingReport r;
    r.area_ratio = box.area() / (static_cast<double>(image.width) * image.height);
    const double margin = cfg.edge_margin_px(image);
    if (box.x_min <= margin) r.clipped_edges.insert(Edge::Left);
    if (box.y_min <= margin) r.clipped_edges.insert(Edge::Top);
    if (box.x_max >= image.width - margin) r.clipped_edges.insert(Edge::Right);
    if (box.y_max >= image.height - margin) r.clipped_edges.insert(Edge::Bottom);

    if (!r.clipped_edges.empty()) {
        r.verdict = FramingVerdict::Clipped;
    } else if (r.area_ratio < cfg.tau_small) {
        r.verdict = FramingVerdict::TooSmall;
    } else if (r.area_ratio > cfg.tau_large) {
        r.verdict = FramingVerdict::TooLarge;
    } else {
        r.verdict = FramingVerdict::Ok;
    }
    return r;
}

FramingReport not_found_framing() { return {}; }

GuidanceMessage make_guidance(GuidanceCode code) {
    switch (code) {
        case GuidanceCode::MoveCloser: return {code, "Move closer to the target", {Direction::Closer}};
        case GuidanceCode::MoveFurther: return {code, "Move further away", {Direction::Further}};
        case GuidanceCode::PanLeft: return {code, "Pan the camera left", {Direction::Left}};
        case GuidanceCode::PanRight: return {code, "Pan the camera right", {Direction::Right}};
        case GuidanceCode::PanUp: return {code, "Move the camera upward", {Direction::Up}};
        case GuidanceCode::PanDown: return {code, "Move the camera downward", {Direction::Down}};
        case GuidanceCode::HoldSteady: return {code, "Hold steady", {Direction::Steady}};
        case GuidanceCode::AimAtTarget: return {code, "Point the camera at the target", {}};
        case GuidanceCode::Ok: return {code, "Capture looks good", {}};
    }
    return {};
}

std::vector<GuidanceMessage> generate_guidance(const FramingReport& framing, const std::optional<ClarityReport>& clarity,
                                               const QualityConfig& cfg) {
    cfg.validate();
    if (framing.verdict == FramingVerdict::NotFound) return {make_guidance(GuidanceCode::AimAtTarget)};

    std::vector<GuidanceMessage> out;
    // The camera pans toward the clipped side, where the object continues.
    const auto& e = framing.clipped_edges;
    if (e.contains(Edge::Top)) out.push_back(make_guidance(GuidanceCode::PanUp));
    if (e.contains(Edge::Bottom)) out.push_back(make_guidance(GuidanceCode::PanDown));
    if (e.contains(Edge::Left)) out.push_back(make_guidance(GuidanceCode::PanLeft));
    if (e.contains(Edge::Right)) out.push_back(make_guidance(GuidanceCode::PanRight));
    if (framing.area_ratio < cfg.tau_small) {
        out.push_back(make_guidance(GuidanceCode::MoveCloser));
    } else if (framing.area_ratio > cfg.tau_large) {
        out.push_back(make_guidance(GuidanceCode::MoveFurther));
    }
    if (clarity && clarity->score < cfg.tau_blur) out.push_back(make_guidance(GuidanceCode::HoldSteady));
    if (out.empty()) out.push_back(make_guidance(GuidanceCode::Ok));
    return out;
}

TargetAssessment assess_target(const RgbImage& image, const std::optional<BBox>& box, const QualityConfig& cfg) {
    require(!image.empty(), "assessment needs a non-empty image");
    TargetAssessment out;
    if (!box) {
        out.framing = not_found_framing();
        out.guidance = generate_guidance(out.framing, std::nullopt, cfg);
        return out;
    }
    const BBox clamped = clamp_to_image(*box, {image.width, image.height});
    out.framing = assess_framing(clamped, {image.width, image.height}, cfg);
    const GrayImage roi = crop(kernels::luma(image), clamped);
    if (roi.width >= 8 && roi.height >= 8) {
        out.clarity = assess_clarity(roi, cfg);
    } else {
        out.clarity = ClarityReport{};  // too few pixels to judge sharpness
    }
    out.guidance = generate_guidance(out.framing, out.clarity, cfg);
    return out;
}

std::string_view to_string(GuidanceCode code) {
    switch (code) {
        case GuidanceCode::MoveCloser: return "move_closer";
        case GuidanceCode::MoveFurther: return "move_further";
        case GuidanceCode::PanLeft: return "pan_left";
        case GuidanceCode::PanRight: return "pan_right";
        case GuidanceCode::PanUp: return "pan_up";
        case GuidanceCode::PanDown: return "pan_down";
        case GuidanceCode::HoldSteady: return "hold_steady";
        case GuidanceCode::AimAtTarget: return "aim_at_target";
        case GuidanceCode::Ok: return "ok";
    }
    return "ok";
}

std::string_view to_string(FramingVerdict verdict) {
    switch (verdict) {
        case FramingVerdict::Ok: return "ok";
        case FramingVerdict::TooSmall: return "too_small";
        case FramingVerdict::TooLarge: return "too_large";
        case FramingVerdict::Clipped: return "clipped";
        case FramingVerdict::NotFound: return "not_found";
    }
    return "not_found";
}

std::string_view to_string(Edge edge) {
    switch (edge) {
        case Edge::Left: return "left";
        case Edge::Right: return "right";
        case Edge::Top: return "top";
        case Edge::Bottom: return "bottom";
    }
    return "left";
}

std::string_view to_string(Direction direction) {
    switch (direction) {
        case Direction::Left: return "left";
        case Direction::Right: return "right";
        case Direction::Up: return "up";
        case Direction::Down: return "down";
        case Direction::Closer: return "closer";
        case Direction::Further: return "further";
        case Direction::Steady: return "steady";
    }
    return "steady";
}

std::optional<GuidanceCode> guidance_code_from_string(std::string_view s) {
    for (auto c : {GuidanceCode::MoveCloser, GuidanceCode::MoveFurther, GuidanceCode::PanLeft, GuidanceCode::PanRight,
                   GuidanceCode::PanUp, GuidanceCode::PanDown, GuidanceCode::HoldSteady, GuidanceCode::AimAtTarget,
                   GuidanceCode::Ok}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

std::optional<Direction> direction_from_string(std::string_view s) {
    for (auto d : {Direction::Left, Direction::Right, Direction::Up, Direction::Down, Direction::Closer,
                   Direction::Further, Direction::Steady}) {
        if (to_string(d) == s) return d;
    }
    return std::nullopt;
}

DirectionSet directions_from_text(std::string_view text) {
    static const std::map<std::string, Direction> kKeywords = {
        {"left", Direction::Left},         {"leftward", Direction::Left},    {"right", Direction::Right},
        {"rightward", Direction::Right},   {"up", Direction::Up},            {"upward", Direction::Up},
        {"upwards", Direction::Up},        {"top", Direction::Up},           {"higher", Direction::Up},
        {"raise", Direction::Up},          {"down", Direction::Down},        {"downward", Direction::Down},
        {"downwards", Direction::Down},    {"bottom", Direction::Down},      {"lower", Direction::Down},
        {"closer", Direction::Closer},     {"nearer", Direction::Closer},    {"approach", Direction::Closer},
        {"further", Direction::Further},   {"farther", Direction::Further},  {"away", Direction::Further},
        {"back", Direction::Further},      {"steady", Direction::Steady},    {"still", Direction::Steady},
        {"stable", Direction::Steady},     {"blurry", Direction::Steady},    {"blur", Direction::Steady},
    };
    DirectionSet out;
    std::string word;
    auto flush = [&] {
        if (auto it = kKeywords.find(word); it != kKeywords.end()) out.insert(it->second);
        word.clear();
    };
    for (char ch : text) {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

}  // namespace clarifier
