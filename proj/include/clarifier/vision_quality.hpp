#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clarifier/geometry.hpp"
#include "clarifier/raster.hpp"

namespace clarifier {

struct QualityConfig {
    double tau_small = 0.05;
    double tau_large = 0.6;
    /// Edge margin as a fraction of min(width, height).
    double delta_edge = 0.02;
    double tau_blur = 0.45;
    double w_lap = 0.5;
    double w_fft = 0.5;
    double lap_lo = 5.0;
    double lap_hi = 600.0;
    double fft_lo = 0.02;
    double fft_hi = 0.40;
    double rho = 0.5;

    void validate() const;
    double edge_margin_px(ImageSize image) const;
};

struct ClarityReport {
    double c_lap = 0.0;
    double c_fft = 0.0;
    double score = 0.0;
};

enum class Edge { Left, Right, Top, Bottom };
enum class FramingVerdict { Ok, TooSmall, TooLarge, Clipped, NotFound };

struct FramingReport {
    double area_ratio = 0.0;
    std::set<Edge> clipped_edges;
    FramingVerdict verdict = FramingVerdict::NotFound;
};

enum class GuidanceCode {
    MoveCloser,
    MoveFurther,
    PanLeft,
    PanRight,
    PanUp,
    PanDown,
    HoldSteady,
    AimAtTarget,
    Ok,
};

/// Canonical direction vocabulary shared by guidance messages and evaluation.
enum class Direction { Left, Right, Up, Down, Closer, Further, Steady };
using DirectionSet = std::set<Direction>;

struct GuidanceMessage {
    GuidanceCode code = GuidanceCode::Ok;
    std::string text;
    DirectionSet direction_components;

    bool operator==(const GuidanceMessage&) const = default;
};

struct TargetAssessment {
    FramingReport framing;
    std::optional<ClarityReport> clarity;  // absent when nothing was detected
    std::vector<GuidanceMessage> guidance;

    bool ok() const { return guidance.size() == 1 && guidance.front().code == GuidanceCode::Ok; }
};

double laplacian_variance(const GrayImage& roi);

/// Fraction of non-DC spectral energy outside the centred disc of radius
/// rho * min(h, w) / 2. Constant images give 0.
double fft_highfreq_ratio(const GrayImage& roi, double rho);

/// min-max normalisation clamped to [0, 1]
double normalize(double x, double lo, double hi);

double clarity_score(double c_lap, double c_fft, const QualityConfig& cfg);
ClarityReport assess_clarity(const GrayImage& roi, const QualityConfig& cfg);

FramingReport assess_framing(const BBox& box, ImageSize image, const QualityConfig& cfg);
FramingReport not_found_framing();

GuidanceMessage make_guidance(GuidanceCode code);
std::vector<GuidanceMessage> generate_guidance(const FramingReport& framing, const std::optional<ClarityReport>& clarity,
                                               const QualityConfig& cfg);

TargetAssessment assess_target(const RgbImage& image, const std::optional<BBox>& box, const QualityConfig& cfg);

std::string_view to_string(GuidanceCode code);
std::string_view to_string(FramingVerdict verdict);
std::string_view to_string(Edge edge);
std::string_view to_string(Direction direction);
std::optional<GuidanceCode> guidance_code_from_string(std::string_view s);
std::optional<Direction> direction_from_string(std::string_view s);

/// Maps free-text guidance onto the canonical direction vocabulary.
DirectionSet directions_from_text(std::string_view text);

}  // namespace clarifier
