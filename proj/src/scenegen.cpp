#include "clarifier/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "clarifier/kernels.hpp"
#include "clarifier/serialize.hpp"

namespace clarifier::scenegen {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

int Rng::uniform_int(int lo, int hi) {
    require(lo <= hi, "uniform_int needs lo <= hi");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
}

double Rng::normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view to_string(Texture t) {
    switch (t) {
        case Texture::Flat: return "flat";
        case Texture::Checker: return "checker";
        case Texture::Noise: return "noise";
    }
    return "flat";
}

Texture texture_from_string(std::string_view s) {
    if (s == "flat") return Texture::Flat;
    if (s == "checker") return Texture::Checker;
    if (s == "noise") return Texture::Noise;
    fail(ErrorCode::InvalidArgument, "unknown texture: " + std::string(s));
}

void SceneSpec::validate() const {
    require(width >= 16 && height >= 16, "scene must be at least 16x16");
    require(hfov_deg > 0.0 && hfov_deg < 180.0, "field of view must lie in (0, 180) degrees");
    require(wall_depth > 0.0, "wall depth must be positive");
    require(depth_noise_sigma >= 0.0, "depth noise must be non-negative");
    if (table) {
        require(table->top_row >= 1 && table->top_row < height - 1, "table top row must lie inside the image");
        require(table->near_depth > 0.0 && table->near_depth < wall_depth, "table must come nearer than the wall");
    }
    for (const auto& t : targets) {
        require(t.x0 >= 0 && t.y0 >= 0 && t.x1 <= width && t.y1 <= height && t.x0 < t.x1 && t.y0 < t.y1,
                "target rect must be a non-empty region inside the image");
        require(t.depth > 0.0, "target depth must be positive");
        require(t.period > 0, "checker period must be positive");
    }
    if (gesture) {
        require(gesture->tip_depth > 0.0 && gesture->finger_length > 0.0 && gesture->radius_px > 0.0,
                "gesture depths, length and radius must be positive");
        require(in_image(gesture->tip, width, height) && in_image(gesture->aim, width, height),
                "gesture tip and aim must lie inside the image");
    }
}

namespace {

constexpr int kDilation = 3;  // matches the default cast mask dilation

double background_depth(const SceneSpec& s, double v) {
    if (!s.table || v <= s.table->top_row) return s.wall_depth;
    const double slope = (s.table->near_depth - s.wall_depth) / (s.height - 1 - s.table->top_row);
    return s.wall_depth + (v - s.table->top_row) * slope;
}

// -1 wall/table, otherwise index of the nearest covering target.
int surface_at(const SceneSpec& s, int x, int y) {
    int id = -1;
    double best = background_depth(s, y);
    for (std::size_t i = 0; i < s.targets.size(); ++i) {
        const auto& t = s.targets[i];
        if (x >= t.x0 && x < t.x1 && y >= t.y0 && y < t.y1 && t.depth < best) {
            best = t.depth;
            id = static_cast<int>(i);
        }
    }
    return id;
}

double pixel_depth(const SceneSpec& s, int x, int y) {
    const int id = surface_at(s, x, y);
    return id < 0 ? background_depth(s, y) : s.targets[static_cast<std::size_t>(id)].depth;
}

// Lower bound on the rasterised depth anywhere bilinear sampling can blend a
// target's edge into (one pixel around each rect).
double conservative_depth(const SceneSpec& s, const Point2& p) {
    double d = background_depth(s, p.v);
    for (const auto& t : s.targets) {
        if (p.u >= t.x0 - 1 && p.u <= t.x1 && p.v >= t.y0 - 1 && p.v <= t.y1) d = std::min(d, t.depth);
    }
    return d;
}

struct Capsule {
    Point2 tip;
    Point2 back;       // unit, from the tip toward the forearm
    double radius = 0;
    double length = 0;  // along `back`, to just past the image border
    double inv_z_tip = 0;
    double inv_z_slope = 0;  // d(1/z)/ds along `back`

    double along(const Point2& q) const { return (q.u - tip.u) * back.u + (q.v - tip.v) * back.v; }
    double distance(const Point2& q) const {
        // segment from the cap centre to the far end
        const double s = std::clamp(along(q), radius, length);
        return std::hypot(q.u - (tip.u + s * back.u), q.v - (tip.v + s * back.v));
    }
    double depth(const Point2& q) const {
        const double s = std::clamp(along(q), 0.0, length);
        return 1.0 / (inv_z_tip + s * inv_z_slope);
    }
};

double exit_distance(const Point2& p, const Point2& dir, int width, int height) {
    double s = std::numeric_limits<double>::infinity();
    if (dir.u > 1e-12) s = std::min(s, (width - 1 - p.u) / dir.u);
    if (dir.u < -1e-12) s = std::min(s, -p.u / dir.u);
    if (dir.v > 1e-12) s = std::min(s, (height - 1 - p.v) / dir.v);
    if (dir.v < -1e-12) s = std::min(s, -p.v / dir.v);
    return s;
}

struct Planted {
    GroundTruth gt;
    Capsule capsule;
};

/// Closed-form ray for the gesture, or nullopt if the layout is unusable
/// (first analytic surface is not the aimed one, hand covers the aim, ...).
std::optional<Planted> plant_gesture(const SceneSpec& s, const GestureSpec& g, const CameraIntrinsics& k) {
    const int ax = static_cast<int>(std::floor(g.aim.u));
    const int ay = static_cast<int>(std::floor(g.aim.v));
    if (ax < 2 || ay < 2 || ax + 3 >= s.width || ay + 3 >= s.height) return std::nullopt;
    const int aim_surface = surface_at(s, ax, ay);
    for (int y = ay - 2; y <= ay + 3; ++y) {
        for (int x = ax - 2; x <= ax + 3; ++x) {
            if (surface_at(s, x, y) != aim_surface) return std::nullopt;
        }
    }
    // Within a uniform 6x6 window the surface depth is affine, so this equals
    // what bilinear sampling of the raster returns.
    const double aim_depth = aim_surface < 0 ? background_depth(s, g.aim.v) : s.targets[aim_surface].depth;
    if (g.tip_depth >= aim_depth - 0.2) return std::nullopt;

    Planted out;
    GroundTruth& gt = out.gt;
    gt.has_gesture = true;
    gt.tip3 = unproject(g.tip, g.tip_depth, k);
    const Point3 hit = unproject(g.aim, aim_depth, k);
    const Point3 to_hit = hit - gt.tip3;
    const double reach = to_hit.norm();
    const Point3 dir = to_hit * (1.0 / reach);
    if (dir.z < 0.2) return std::nullopt;
    gt.base3 = gt.tip3 - dir * g.finger_length;
    gt.ray = make_pointing_ray(gt.tip3, gt.base3);
    gt.t = g.finger_length + reach;
    gt.point3 = hit;
    gt.pixel = g.aim;

    const Point2 base2 = project(gt.base3, k);
    const double base_px = std::hypot(base2.u - g.tip.u, base2.v - g.tip.v);
    if (base_px < 2.0) return std::nullopt;
    Capsule& c = out.capsule;
    c.tip = g.tip;
    c.back = {(base2.u - g.tip.u) / base_px, (base2.v - g.tip.v) / base_px};
    if (c.back.u * (g.tip.u - g.aim.u) + c.back.v * (g.tip.v - g.aim.v) <= 0.0) return std::nullopt;
    c.radius = g.radius_px;
    const double exit = exit_distance(g.tip, c.back, s.width, s.height);
    if (exit < 60.0) return std::nullopt;
    c.length = exit + c.radius + 2.0;
    c.inv_z_tip = 1.0 / gt.tip3.z;
    c.inv_z_slope = (1.0 / gt.base3.z - 1.0 / gt.tip3.z) / base_px;
    if (c.inv_z_tip + c.length * c.inv_z_slope <= 0.0) return std::nullopt;

    const double clearance = c.radius + kDilation + 3.0;
    if (c.distance(g.aim) <= clearance + 3.0) return std::nullopt;

    // The aimed surface must be the first thing the ray meets once it
    // leaves the finger.
    constexpr double dt = 1e-3;
    for (double t = g.finger_length; t < gt.t - dt; t += dt) {
        const Point3 p = gt.ray.at(t);
        if (p.z <= 0.0) return std::nullopt;
        const Point2 px = project(p, k);
        if (!in_image(px, s.width, s.height)) return std::nullopt;
        if (c.distance(px) <= clearance) continue;
        if (p.z >= conservative_depth(s, px)) return std::nullopt;
    }

    if (aim_surface >= 0) {
        const auto& t = s.targets[static_cast<std::size_t>(aim_surface)];
        gt.target_index = aim_surface;
        gt.target_bbox = t.box();
        gt.target_label = t.label;
    }
    return out;
}

std::array<std::uint8_t, 3> mix(const std::array<std::uint8_t, 3>& a, const std::array<std::uint8_t, 3>& b, double w) {
    std::array<std::uint8_t, 3> out{};
    for (int c = 0; c < 3; ++c) {
        out[c] = static_cast<std::uint8_t>(std::lround(a[c] * (1.0 - w) + b[c] * w));
    }
    return out;
}

constexpr std::array<std::uint8_t, 3> kWall{214, 208, 196};
constexpr std::array<std::uint8_t, 3> kTable{150, 108, 70};
constexpr std::array<std::uint8_t, 3> kSkin{224, 172, 140};
constexpr int kNoiseCell = 3;

std::vector<double> noise_cells(std::uint64_t seed, std::size_t index, const TargetSpec& t) {
    Rng rng(seed * 1315423911ULL + index + 1);
    const int cw = (t.x1 - t.x0 + kNoiseCell - 1) / kNoiseCell;
    const int ch = (t.y1 - t.y0 + kNoiseCell - 1) / kNoiseCell;
    std::vector<double> cells(static_cast<std::size_t>(cw) * ch);
    for (auto& v : cells) v = rng.uniform();
    return cells;
}

const std::vector<std::string> kLabels{"menu", "mug", "book", "bottle", "poster", "plant", "laptop", "box", "clock", "lamp"};

}  // namespace

double analytic_depth(const SceneSpec& spec, const Point2& p) {
    double d = background_depth(spec, p.v);
    for (const auto& t : spec.targets) {
        if (p.u >= t.x0 && p.u <= t.x1 - 1 && p.v >= t.y0 && p.v <= t.y1 - 1) d = std::min(d, t.depth);
    }
    return d;
}

SceneBundle generate(const SceneSpec& spec) {
    spec.validate();
    SceneBundle b;
    b.spec = spec;
    b.id = "scene_" + std::to_string(spec.seed);
    b.k = CameraIntrinsics::from_fov(spec.width, spec.height, spec.hfov_deg);

    std::optional<Capsule> capsule;
    if (spec.gesture) {
        auto planted = plant_gesture(spec, *spec.gesture, b.k);
        if (!planted) fail(ErrorCode::InvalidArgument, "gesture does not reach its aim pixel unobstructed");
        b.gt = planted->gt;
        capsule = planted->capsule;
    }

    std::vector<std::vector<double>> noise(spec.targets.size());
    for (std::size_t i = 0; i < spec.targets.size(); ++i) {
        if (spec.targets[i].texture == Texture::Noise) noise[i] = noise_cells(spec.seed, i, spec.targets[i]);
    }

    b.image = RgbImage(spec.width, spec.height);
    b.depth = DepthMap(spec.width, spec.height);
    b.depth.scale = DepthScale::Metric;
    b.mask = HandMask(spec.width, spec.height);

#pragma omp parallel for schedule(static) if (spec.width * spec.height >= (1 << 14))
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const Point2 q{double(x), double(y)};
            if (capsule && capsule->distance(q) <= capsule->radius) {
                b.mask.at(x, y) = 1;
                b.depth.at(x, y) = capsule->depth(q);
                b.image.at(x, y) = kSkin;
                continue;
            }
            const int id = surface_at(spec, x, y);
            b.depth.at(x, y) = pixel_depth(spec, x, y);
            if (id < 0) {
                b.image.at(x, y) = spec.table && y > spec.table->top_row ? kTable : kWall;
                continue;
            }
            const auto& t = spec.targets[static_cast<std::size_t>(id)];
            const int lx = x - t.x0;
            const int ly = y - t.y0;
            switch (t.texture) {
                case Texture::Flat: b.image.at(x, y) = t.color_a; break;
                case Texture::Checker:
                    b.image.at(x, y) = ((lx / t.period + ly / t.period) % 2 == 0) ? t.color_a : t.color_b;
                    break;
                case Texture::Noise: {
                    const int cw = (t.x1 - t.x0 + kNoiseCell - 1) / kNoiseCell;
                    const double w = noise[static_cast<std::size_t>(id)][static_cast<std::size_t>(ly / kNoiseCell) * cw + lx / kNoiseCell];
                    b.image.at(x, y) = mix(t.color_a, t.color_b, w);
                    break;
                }
            }
        }
    }

    if (spec.depth_noise_sigma > 0.0) {
        Rng rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
        for (auto& d : b.depth.data) d = std::max(1e-6, d + spec.depth_noise_sigma * rng.normal());
    }

    for (const auto& t : spec.targets) b.detections.push_back({t.label, t.box(), t.score});
    std::stable_sort(b.detections.begin(), b.detections.end(),
                     [](const auto& l, const auto& r) { return l.score > r.score; });

    if (b.gt.target_bbox) {
        const QualityConfig q;
        b.gt.expected_guidance =
            generate_guidance(assess_framing(*b.gt.target_bbox, b.k.size(), q), ClarityReport{0, 0, 1.0}, q);
    }
    return b;
}

SceneSpec random_spec(std::uint64_t seed) {
    Rng rng(seed);
    SceneSpec s;
    s.seed = seed;
    s.wall_depth = rng.uniform(2.5, 5.0);
    if (rng.uniform() < 0.4) s.table = TableSpec{rng.uniform_int(300, 380), rng.uniform(0.9, 1.6)};

    const bool plane_only = rng.uniform() < 0.25;
    const int wanted = plane_only ? 0 : rng.uniform_int(1, 3);
    std::vector<std::string> labels = kLabels;
    const int floor_row = s.table ? s.table->top_row : s.height;
    for (int attempt = 0; attempt < 60 && static_cast<int>(s.targets.size()) < wanted; ++attempt) {
        TargetSpec t;
        const int w = rng.uniform_int(130, 240);
        const int h = rng.uniform_int(120, 190);
        t.x0 = rng.uniform_int(16, s.width - 16 - w);
        t.y0 = rng.uniform_int(16, std::max(16, std::min(s.height - 16, floor_row) - h));
        t.x1 = t.x0 + w;
        t.y1 = t.y0 + h;
        t.depth = rng.uniform(1.2, s.wall_depth - 0.4);
        const double tex = rng.uniform();
        t.texture = tex < 0.45 ? Texture::Checker : tex < 0.85 ? Texture::Noise : Texture::Flat;
        t.period = rng.uniform_int(6, 20);
        t.color_a = {static_cast<std::uint8_t>(rng.uniform_int(120, 255)), static_cast<std::uint8_t>(rng.uniform_int(40, 200)),
                     static_cast<std::uint8_t>(rng.uniform_int(20, 160))};
        t.color_b = {static_cast<std::uint8_t>(rng.uniform_int(0, 80)), static_cast<std::uint8_t>(rng.uniform_int(0, 80)),
                     static_cast<std::uint8_t>(rng.uniform_int(0, 80))};
        t.score = std::round(rng.uniform(0.55, 0.99) * 1000.0) / 1000.0;
        const std::size_t li = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(labels.size()) - 1));
        t.label = labels[li];
        if (t.y1 > floor_row) continue;
        const bool overlaps = std::any_of(s.targets.begin(), s.targets.end(), [&](const TargetSpec& o) {
            return t.x0 < o.x1 + 8 && o.x0 < t.x1 + 8 && t.y0 < o.y1 + 8 && o.y0 < t.y1 + 8;
        });
        if (overlaps) continue;
        labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(li));
        s.targets.push_back(t);
    }

    const CameraIntrinsics k = CameraIntrinsics::from_fov(s.width, s.height, s.hfov_deg);
    for (int attempt = 0; attempt < 400; ++attempt) {
        GestureSpec g;
        if (!s.targets.empty()) {
            const auto& t = s.targets[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(s.targets.size()) - 1))];
            g.aim = {rng.uniform(t.x0 + 4.0, t.x1 - 5.0), rng.uniform(t.y0 + 4.0, t.y1 - 5.0)};
        } else {
            g.aim = {rng.uniform(20.0, s.width - 21.0), rng.uniform(20.0, s.height - 21.0)};
        }
        const double angle = rng.uniform(20.0, 160.0) * std::numbers::pi / 180.0;
        const double dist = rng.uniform(70.0, 260.0);
        g.tip = {g.aim.u + dist * std::cos(angle), g.aim.v + dist * std::sin(angle)};
        g.tip_depth = rng.uniform(0.35, 0.7);
        g.finger_length = rng.uniform(0.06, 0.1);
        g.radius_px = rng.uniform(6.0, 10.0);
        if (g.tip.u < 20 || g.tip.u > s.width - 21 || g.tip.v < 40 || g.tip.v > s.height - 21) continue;
        if (plant_gesture(s, g, k)) {
            s.gesture = g;
            break;
        }
    }
    return s;
}

IntersectionResult brute_force_intersection(const Ray3& ray, const DepthMap& depth, const CameraIntrinsics& k,
                                            const CastConfig& cfg, const HandMask* hand) {
    cfg.validate();
    const double fine = cfg.step / 100.0;
    double tau = cfg.tau_collision;
    if (depth.scale == DepthScale::Relative) {
        const auto [lo, hi] = std::minmax_element(depth.data.begin(), depth.data.end());
        tau *= *hi - *lo;
    }

    // Naive Chebyshev dilation of the hand mask.
    HandMask blocked;
    if (hand && !hand->empty()) {
        const int r = cfg.mask_dilation_px;
        blocked = HandMask(hand->width, hand->height);
        for (int y = 0; y < hand->height; ++y) {
            for (int x = 0; x < hand->width; ++x) {
                if (!hand->at(x, y)) continue;
                for (int yy = std::max(0, y - r); yy <= std::min(hand->height - 1, y + r); ++yy) {
                    for (int xx = std::max(0, x - r); xx <= std::min(hand->width - 1, x + r); ++xx) blocked.at(xx, yy) = 1;
                }
            }
        }
    }

    auto residual = [&](double t, Point3& p, Point2& px) -> std::optional<double> {
        p = {ray.origin.x + t * ray.dir.x, ray.origin.y + t * ray.dir.y, ray.origin.z + t * ray.dir.z};
        if (p.z <= 0.0) return std::nullopt;
        px = {p.x / p.z * k.fx + k.cx, p.y / p.z * k.fy + k.cy};
        if (px.u < 0.0 || px.v < 0.0 || px.u > depth.width - 1 || px.v > depth.height - 1) return std::nullopt;
        if (!blocked.empty()) {
            const long bx = std::lround(px.u);
            const long by = std::lround(px.v);
            if (blocked.at(static_cast<int>(bx), static_cast<int>(by))) return std::nullopt;
        }
        const int x0 = std::min(static_cast<int>(std::floor(px.u)), depth.width - 2);
        const int y0 = std::min(static_cast<int>(std::floor(px.v)), depth.height - 2);
        const double fx = px.u - x0;
        const double fy = px.v - y0;
        const double d = (1 - fy) * ((1 - fx) * depth.at(x0, y0) + fx * depth.at(x0 + 1, y0)) +
                         fy * ((1 - fx) * depth.at(x0, y0 + 1) + fx * depth.at(x0 + 1, y0 + 1));
        return p.z - d;
    };

    const auto n = static_cast<std::size_t>(std::floor((cfg.t_max - cfg.t_min) / fine + 1e-9)) + 1;
    std::optional<double> prev;
    IntersectionResult prev_hit;
    IntersectionResult best;
    double best_abs = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = cfg.t_min + static_cast<double>(i) * fine;
        IntersectionResult cur;
        const auto r = residual(t, cur.point3, cur.pixel);
        if (r) {
            cur.status = HitStatus::Hit;
            cur.t = t;
            cur.residual = *r;
            if (prev && *prev < 0.0 && *r >= 0.0) {
                const IntersectionResult& pick = std::abs(*prev) < std::abs(*r) ? prev_hit : cur;
                if (std::abs(pick.residual) <= tau) return pick;
            }
            if (std::abs(*r) <= tau && std::abs(*r) < best_abs) {
                best = cur;
                best_abs = std::abs(*r);
            }
        }
        prev = r;
        prev_hit = cur;
    }
    return best;  // status Miss when nothing was within tolerance
}

std::vector<RgbImage> gen_blur_series(const RgbImage& image, const std::vector<double>& sigmas) {
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        require(sigmas[i] >= 0.0, "blur sigmas must be non-negative");
        require(i == 0 || sigmas[i] > sigmas[i - 1], "blur sigmas must be strictly increasing");
    }
    std::vector<RgbImage> out;
    out.reserve(sigmas.size());
    for (double s : sigmas) {
        RgbImage blurred = s == 0.0 ? image : kernels::gaussian_blur(image, s);
        blurred.source.clear();
        out.push_back(std::move(blurred));
    }
    return out;
}

RgbImage texture_fixture(std::uint64_t seed, int width, int height) {
    SceneSpec s;
    s.seed = seed;
    s.width = width;
    s.height = height;
    Rng rng(seed + 0xC0FFEE);
    TargetSpec t;
    t.label = "texture";
    t.x0 = 0;
    t.y0 = 0;
    t.x1 = width;
    t.y1 = height;
    t.depth = 1.0;
    t.texture = seed % 2 == 0 ? Texture::Checker : Texture::Noise;
    t.period = rng.uniform_int(3, 8);
    t.color_a = {static_cast<std::uint8_t>(rng.uniform_int(170, 255)), static_cast<std::uint8_t>(rng.uniform_int(150, 255)),
                 static_cast<std::uint8_t>(rng.uniform_int(120, 255))};
    t.color_b = {static_cast<std::uint8_t>(rng.uniform_int(0, 60)), static_cast<std::uint8_t>(rng.uniform_int(0, 60)),
                 static_cast<std::uint8_t>(rng.uniform_int(0, 60))};
    s.targets.push_back(t);
    RgbImage image = generate(s).image;

    // Coarse shading so the spectrum is not a single fine-scale band; a bare
    // checker blurs to a flat field where 8-bit rounding noise dominates.
    const double px = rng.uniform(60.0, 120.0);
    const double py = rng.uniform(60.0, 120.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double shade = std::sin(2.0 * std::numbers::pi * x / px + phase) * std::sin(2.0 * std::numbers::pi * y / py);
            for (auto& c : image.at(x, y)) {
                const double v = 0.6 * c + 0.4 * (128.0 + 110.0 * shade);
                c = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return image;
}

// ---------------------------------------------------------------------------
// Serialization

json spec_to_json(const SceneSpec& s) {
    json j{{"seed", s.seed},
           {"width", s.width},
           {"height", s.height},
           {"hfov_deg", s.hfov_deg},
           {"wall_depth", s.wall_depth},
           {"depth_noise_sigma", s.depth_noise_sigma}};
    j["table"] = s.table ? json{{"top_row", s.table->top_row}, {"near_depth", s.table->near_depth}} : json(nullptr);
    j["targets"] = json::array();
    for (const auto& t : s.targets) {
        j["targets"].push_back({{"label", t.label},
                                {"rect", {t.x0, t.y0, t.x1, t.y1}},
                                {"depth", t.depth},
                                {"texture", std::string(to_string(t.texture))},
                                {"period", t.period},
                                {"color_a", t.color_a},
                                {"color_b", t.color_b},
                                {"score", t.score}});
    }
    if (s.gesture) {
        const auto& g = *s.gesture;
        j["gesture"] = {{"tip", g.tip},
                        {"aim", g.aim},
                        {"tip_depth", g.tip_depth},
                        {"finger_length", g.finger_length},
                        {"radius_px", g.radius_px}};
    } else {
        j["gesture"] = nullptr;
    }
    return j;
}

SceneSpec spec_from_json(const json& j) {
    SceneSpec s;
    try {
        s.seed = j.value("seed", std::uint64_t{0});
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        s.hfov_deg = j.value("hfov_deg", s.hfov_deg);
        s.wall_depth = j.value("wall_depth", s.wall_depth);
        s.depth_noise_sigma = j.value("depth_noise_sigma", 0.0);
        if (j.contains("table") && !j["table"].is_null()) {
            s.table = TableSpec{j["table"].at("top_row").get<int>(), j["table"].at("near_depth").get<double>()};
        }
        for (const auto& jt : j.value("targets", json::array())) {
            TargetSpec t;
            t.label = jt.at("label").get<std::string>();
            const auto r = jt.at("rect").get<std::array<int, 4>>();
            t.x0 = r[0];
            t.y0 = r[1];
            t.x1 = r[2];
            t.y1 = r[3];
            t.depth = jt.at("depth").get<double>();
            t.texture = texture_from_string(jt.value("texture", std::string("checker")));
            t.period = jt.value("period", t.period);
            t.color_a = jt.value("color_a", t.color_a);
            t.color_b = jt.value("color_b", t.color_b);
            t.score = jt.value("score", t.score);
            s.targets.push_back(t);
        }
        if (j.contains("gesture") && !j["gesture"].is_null()) {
            const auto& jg = j["gesture"];
            GestureSpec g;
            g.tip = jg.at("tip").get<Point2>();
            g.aim = jg.at("aim").get<Point2>();
            g.tip_depth = jg.at("tip_depth").get<double>();
            g.finger_length = jg.value("finger_length", g.finger_length);
            g.radius_px = jg.value("radius_px", g.radius_px);
            s.gesture = g;
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedAsset, std::string("malformed scene spec: ") + e.what());
    }
    s.validate();
    return s;
}

json gt_to_json(const GroundTruth& gt) {
    json j{{"has_gesture", gt.has_gesture}};
    if (gt.has_gesture) {
        j["intersection"] = {{"pixel", gt.pixel}, {"point3", gt.point3}, {"t", gt.t}};
        j["ray"] = gt.ray;
        j["tip3"] = gt.tip3;
        j["base3"] = gt.base3;
    }
    j["target_bbox"] = gt.target_bbox ? json(*gt.target_bbox) : json(nullptr);
    j["target_label"] = gt.target_label;
    j["expected_guidance"] = gt.expected_guidance;
    return j;
}

void write_bundle(const SceneBundle& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    assets::save_image(b.image, dir / "image.png");
    assets::save_depth_pfm(b.depth, dir / "depth.pfm");
    const bool has_mask = mask_area(b.mask) > 0;
    if (has_mask) assets::save_mask(b.mask, dir / "mask.png");
    assets::save_intrinsics(b.k, dir / "intrinsics.json");
    assets::save_detections(b.detections, dir / "detections.json");
    const json scene{{"id", b.id},
                     {"image", "image.png"},
                     {"depth", {{"file", "depth.pfm"}, {"kind", "metric"}}},
                     {"mask", has_mask ? json("mask.png") : json(nullptr)},
                     {"intrinsics", "intrinsics.json"},
                     {"detections", "detections.json"},
                     {"hfov_deg", b.spec.hfov_deg}};
    assets::write_text(dir / "scene.json", scene.dump(2) + "\n");
    assets::write_text(dir / "gt.json", gt_to_json(b.gt).dump(2) + "\n");
    assets::write_text(dir / "spec.json", spec_to_json(b.spec).dump(2) + "\n");
}

}  // namespace clarifier::scenegen
