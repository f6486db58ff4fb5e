#include "clarifier/serialize.hpp"

namespace clarifier {

void to_json(json& j, const Point2& p) { j = json{{"u", p.u}, {"v", p.v}}; }
void from_json(const json& j, Point2& p) {
    j.at("u").get_to(p.u);
    j.at("v").get_to(p.v);
}

void to_json(json& j, const Point3& p) { j = json{{"x", p.x}, {"y", p.y}, {"z", p.z}}; }
void from_json(const json& j, Point3& p) {
    j.at("x").get_to(p.x);
    j.at("y").get_to(p.y);
    j.at("z").get_to(p.z);
}

void to_json(json& j, const BBox& b) { j = json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }
void from_json(const json& j, BBox& b) {
    if (j.is_array()) {
        if (j.size() != 4) throw json::type_error::create(302, "box must have four coordinates", &j);
        b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    } else {
        b = {j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(), j.at("y_max").get<double>()};
    }
}

void to_json(json& j, const Ray3& r) { j = json{{"origin", r.origin}, {"dir", r.dir}}; }

void to_json(json& j, const CameraIntrinsics& k) {
    j = json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}
void from_json(const json& j, CameraIntrinsics& k) {
    j.at("fx").get_to(k.fx);
    j.at("fy").get_to(k.fy);
    j.at("cx").get_to(k.cx);
    j.at("cy").get_to(k.cy);
    j.at("width").get_to(k.width);
    j.at("height").get_to(k.height);
}

void to_json(json& j, const IntersectionResult& r) {
    j = json{{"status", r.hit() ? "hit" : "miss"}};
    if (r.hit()) {
        j["point3"] = r.point3;
        j["pixel"] = r.pixel;
        j["residual"] = r.residual;
        j["t"] = r.t;
    }
}

void to_json(json& j, const PointingEstimate& p) {
    j = json{{"tip2", p.tip2},   {"base2", p.base2}, {"tip3", p.tip3},
             {"base3", p.base3}, {"ray", p.ray},     {"confidence", p.confidence}, {"elongation", p.elongation}};
}

void to_json(json& j, const ClarityReport& c) { j = json{{"c_lap", c.c_lap}, {"c_fft", c.c_fft}, {"score", c.score}}; }

void to_json(json& j, const FramingReport& f) {
    json edges = json::array();
    for (auto e : f.clipped_edges) edges.push_back(std::string(to_string(e)));
    j = json{{"area_ratio", f.area_ratio}, {"clipped_edges", edges}, {"verdict", std::string(to_string(f.verdict))}};
}

void to_json(json& j, const GuidanceMessage& g) {
    j = json{{"code", std::string(to_string(g.code))},
             {"text", g.text},
             {"direction_components", directions_to_json(g.direction_components)}};
}

void to_json(json& j, const TargetAssessment& a) {
    j = json{{"framing", a.framing}, {"guidance", a.guidance}};
    j["clarity"] = a.clarity ? json(*a.clarity) : json(nullptr);
}

void to_json(json& j, const DetectionResult& d) { j = json{{"label", d.label}, {"box", d.bbox}, {"score", d.score}}; }
void from_json(const json& j, DetectionResult& d) {
    j.at("label").get_to(d.label);
    d.bbox = j.contains("box") ? j.at("box").get<BBox>() : j.at("bbox").get<BBox>();
    j.at("score").get_to(d.score);
}

void to_json(json& j, const CastConfig& c) {
    j = json{{"t_min", c.t_min},
             {"t_max", c.t_max},
             {"step", c.step},
             {"tau_collision", c.tau_collision},
             {"mask_dilation_px", c.mask_dilation_px}};
}
void from_json(const json& j, CastConfig& c) {
    c.t_min = j.value("t_min", c.t_min);
    c.t_max = j.value("t_max", c.t_max);
    c.step = j.value("step", c.step);
    c.tau_collision = j.value("tau_collision", c.tau_collision);
    c.mask_dilation_px = j.value("mask_dilation_px", c.mask_dilation_px);
}

void to_json(json& j, const RoiConfig& c) {
    j = json{{"base_side", c.base_side},
             {"depth_gain", c.depth_gain},
             {"ref_depth", c.ref_depth},
             {"min_side", c.min_side},
             {"max_side", c.max_side}};
}
void from_json(const json& j, RoiConfig& c) {
    c.base_side = j.value("base_side", c.base_side);
    c.depth_gain = j.value("depth_gain", c.depth_gain);
    c.ref_depth = j.value("ref_depth", c.ref_depth);
    c.min_side = j.value("min_side", c.min_side);
    c.max_side = j.value("max_side", c.max_side);
}

void to_json(json& j, const QualityConfig& c) {
    j = json{{"tau_small", c.tau_small}, {"tau_large", c.tau_large}, {"delta_edge", c.delta_edge},
             {"tau_blur", c.tau_blur},   {"w_lap", c.w_lap},         {"w_fft", c.w_fft},
             {"lap_lo", c.lap_lo},       {"lap_hi", c.lap_hi},       {"fft_lo", c.fft_lo},
             {"fft_hi", c.fft_hi},       {"rho", c.rho}};
}
void from_json(const json& j, QualityConfig& c) {
    c.tau_small = j.value("tau_small", c.tau_small);
    c.tau_large = j.value("tau_large", c.tau_large);
    c.delta_edge = j.value("delta_edge", c.delta_edge);
    c.tau_blur = j.value("tau_blur", c.tau_blur);
    c.w_lap = j.value("w_lap", c.w_lap);
    c.w_fft = j.value("w_fft", c.w_fft);
    c.lap_lo = j.value("lap_lo", c.lap_lo);
    c.lap_hi = j.value("lap_hi", c.lap_hi);
    c.fft_lo = j.value("fft_lo", c.fft_lo);
    c.fft_hi = j.value("fft_hi", c.fft_hi);
    c.rho = j.value("rho", c.rho);
    c.validate();
}

void to_json(json& j, const PointingConfig& c) {
    j = json{{"min_area", c.min_area},
             {"min_elongation", c.min_elongation},
             {"base_fraction", c.base_fraction},
             {"refine_max_px", c.refine_max_px},
             {"refine_tolerance", c.refine_tolerance}};
}
void from_json(const json& j, PointingConfig& c) {
    c.min_area = j.value("min_area", c.min_area);
    c.min_elongation = j.value("min_elongation", c.min_elongation);
    c.base_fraction = j.value("base_fraction", c.base_fraction);
    c.refine_max_px = j.value("refine_max_px", c.refine_max_px);
    c.refine_tolerance = j.value("refine_tolerance", c.refine_tolerance);
    c.validate();
}

json directions_to_json(const DirectionSet& s) {
    json out = json::array();
    for (auto d : s) out.push_back(std::string(to_string(d)));
    return out;
}

DirectionSet directions_from_json(const json& j) {
    DirectionSet out;
    for (const auto& item : j) {
        const auto d = direction_from_string(item.get<std::string>());
        if (!d) fail(ErrorCode::InvalidArgument, "unknown direction component: " + item.get<std::string>());
        out.insert(*d);
    }
    return out;
}

}  // namespace clarifier
