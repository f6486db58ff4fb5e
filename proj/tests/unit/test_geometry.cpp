#include "check.hpp"

#include <cmath>
#include <random>

#include "clarifier/geometry.hpp"
#include "clarifier/hand_pointing.hpp"

using namespace clarifier;

namespace {

CameraIntrinsics vga() {
    CameraIntrinsics k;
    k.fx = 500.0;
    k.fy = 500.0;
    k.cx = 320.0;
    k.cy = 240.0;
    k.width = 640;
    k.height = 480;
    return k;
}

DepthMap constant_depth(int w, int h, double d) {
    DepthMap m(w, h, d);
    return m;
}

}  // namespace

TEST_CASE("Unproject.PrincipalPointMapsToOpticalAxis") {
    const auto k = vga();
    const Point3 q = unproject({k.cx, k.cy}, 2.0, k);
    CHECK_EQ(q.x, 0.0);
    CHECK_EQ(q.y, 0.0);
    CHECK_EQ(q.z, 2.0);
}

TEST_CASE("Unproject.QuarterFocalLengthRight") {
    const auto k = vga();
    // x = (u - cx) d / fx
    const Point3 q = unproject({k.cx + k.fx / 4, k.cy}, 4.0, k);
    CHECK_NEAR(q.x, 1.0, 1e-12);
    CHECK_NEAR(q.y, 0.0, 1e-12);
    CHECK_NEAR(q.z, 4.0, 1e-12);
}

TEST_CASE("Unproject.RejectsBadInputs") {
    const auto k = vga();
    CHECK_THROWS_AS(unproject({10, 10}, 0.0, k), Error);
    CHECK_THROWS_AS(unproject({10, 10}, -1.0, k), Error);
    CHECK_THROWS_AS(unproject({-5, 10}, 1.0, k), Error);
    CHECK_THROWS_AS(unproject({10, 480.5}, 1.0, k), Error);
}

TEST_CASE("Project.Examples") {
    const auto k = vga();
    const Point2 c = project({0, 0, 5}, k);
    CHECK_EQ(c.u, k.cx);
    CHECK_EQ(c.v, k.cy);
    const Point2 p = project({1, 0, 1}, k);
    CHECK_EQ(p.u, 820.0);
    CHECK_EQ(p.v, k.cy);
    CHECK_THROWS_AS(project({0, 0, 0}, k), Error);
    CHECK_THROWS_AS(project({0, 0, -1}, k), Error);
}

TEST_CASE("Project.RoundTripRandomPixels") {
    const auto k = vga();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 639), v(0, 479), d(0.1, 30.0);
    for (int i = 0; i < 100; ++i) {
        const Point2 p{u(rng), v(rng)};
        const Point2 back = project(unproject(p, d(rng), k), k);
        CHECK_NEAR(back.u, p.u, 1e-6);
        CHECK_NEAR(back.v, p.v, 1e-6);
    }
}

TEST_CASE("Intrinsics.FromFovPutsPrincipalPointAtCenter") {
    const auto k = CameraIntrinsics::from_fov(640, 480, 90.0);
    CHECK_NEAR(k.fx, 320.0, 1e-9);  // (w/2) / tan(45deg)
    CHECK_EQ(k.fx, k.fy);
    CHECK_EQ(k.cx, 320.0);
    CHECK_EQ(k.cy, 240.0);
}

TEST_CASE("SampleDepth.BilinearMatchesHandInterpolation") {
    DepthMap d(2, 2);
    d.at(0, 0) = 1.0;
    d.at(1, 0) = 2.0;
    d.at(0, 1) = 3.0;
    d.at(1, 1) = 5.0;
    // (1-a)(1-b)*1 + a(1-b)*2 + (1-a)b*3 + ab*5 at a=0.25, b=0.5
    const double expected = 0.75 * 0.5 * 1 + 0.25 * 0.5 * 2 + 0.75 * 0.5 * 3 + 0.25 * 0.5 * 5;
    CHECK_NEAR(*sample_depth(d, {0.25, 0.5}), expected, 1e-12);
    CHECK_EQ(*sample_depth(d, {1.0, 1.0}), 5.0);
    CHECK_FALSE(sample_depth(d, {1.01, 0.0}).has_value());
}

TEST_CASE("PointingRay.AxisAlignedExample") {
    const Ray3 r = make_pointing_ray({0, 0, 1.0}, {0, 0, 0.5});
    CHECK_EQ(r.origin, (Point3{0, 0, 0.5}));
    CHECK_NEAR(r.dir.x, 0.0, 1e-15);
    CHECK_NEAR(r.dir.y, 0.0, 1e-15);
    CHECK_NEAR(r.dir.z, 1.0, 1e-15);
}

TEST_CASE("PointingRay.DegenerateFinger") {
    try {
        make_pointing_ray({1, 2, 3}, {1, 2, 3});
        FAIL("expected DegenerateFinger");
    } catch (const Error& e) {
        CHECK_EQ(e.code(), ErrorCode::DegenerateFinger);
    }
    CHECK_THROWS_AS(make_pointing_ray({0, 0, 1.00005}, {0, 0, 1.0}), Error);
}

TEST_CASE("PointingRay.UnitNormOverRandomPairs") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const Point3 a{c(rng), c(rng), c(rng) + 3.0};
        const Point3 b{c(rng), c(rng), c(rng) + 3.0};
        if ((a - b).norm() <= 1e-3) continue;
        CHECK_NEAR(make_pointing_ray(a, b).dir.norm(), 1.0, 1e-6);
    }
}

TEST_CASE("CastRay.FrontalWall") {
    const auto k = vga();
    const DepthMap wall = constant_depth(640, 480, 3.0);
    CastConfig cfg;
    const Ray3 ray{{0, 0, 0.5}, {0, 0, 1}};
    const auto hit = cast_ray(ray, wall, k, cfg);
    REQUIRE(hit.hit());
    CHECK_NEAR(hit.point3.z, 3.0, cfg.step / 100.0);
    CHECK_NEAR(hit.t, 2.5, cfg.step / 100.0);
    CHECK_LE(std::abs(hit.residual), cfg.tau_collision);
}

TEST_CASE("CastRay.ObliqueRayOnWallMatchesAnalyticT") {
    const auto k = vga();
    const DepthMap wall = constant_depth(640, 480, 4.0);
    const Point3 o{0.1, 0.2, 0.5};
    Point3 dir{0.2, -0.1, 1.0};
    dir = dir * (1.0 / dir.norm());
    const auto hit = cast_ray({o, dir}, wall, k, CastConfig{});
    REQUIRE(hit.hit());
    const double t_exact = (4.0 - o.z) / dir.z;
    CHECK_NEAR(hit.t, t_exact, CastConfig{}.step / 100.0);
}

TEST_CASE("CastRay.MissWhenRayLeavesFrustum") {
    const auto k = vga();
    const DepthMap wall = constant_depth(640, 480, 3.0);
    // Heads sideways and out of view long before reaching the wall.
    Point3 dir{1.0, 0.0, 0.05};
    dir = dir * (1.0 / dir.norm());
    const auto hit = cast_ray({{0, 0, 0.5}, dir}, wall, k, CastConfig{});
    CHECK_FALSE(hit.hit());
}

TEST_CASE("CastRay.MissWhenResidualsStayAboveTolerance") {
    const auto k = vga();
    const DepthMap wall = constant_depth(640, 480, 30.0);
    CastConfig cfg;
    cfg.t_max = 5.0;  // never reaches the far wall
    const auto hit = cast_ray({{0, 0, 0.5}, {0, 0, 1}}, wall, k, cfg);
    CHECK_FALSE(hit.hit());
}

TEST_CASE("CastRay.HandMaskSamplesAreSkipped") {
    const auto k = vga();
    DepthMap d = constant_depth(640, 480, 3.0);
    // A "hand" at depth 1.0 right in front of the ray's start.
    HandMask hand(640, 480, 0);
    for (int y = 230; y < 250; ++y) {
        for (int x = 310; x < 330; ++x) {
            d.at(x, y) = 1.0;
            hand.at(x, y) = 1;
        }
    }
    const Ray3 ray{{0, 0, 0.5}, {0, 0, 1}};
    const auto without = cast_ray(ray, d, k, CastConfig{});
    REQUIRE(without.hit());
    CHECK_NEAR(without.point3.z, 1.0, 0.01);
    const auto with = cast_ray(ray, d, k, CastConfig{}, &hand);
    INFO("every sample projects onto the masked hand");
    CHECK_FALSE(with.hit());
}

TEST_CASE("CastRay.RelativeToleranceScalesWithRange") {
    DepthMap d = constant_depth(4, 4, 10.0);
    d.at(0, 0) = 0.0;
    d.scale = DepthScale::Relative;
    CastConfig cfg = CastConfig::relative_default();
    CHECK_NEAR(cfg.effective_tau(d), 0.03 * 10.0, 1e-12);
    d.scale = DepthScale::Metric;
    CHECK_NEAR(cfg.effective_tau(d), 0.03, 1e-12);
}

TEST_CASE("CastConfig.RejectsInvalid") {
    CastConfig c;
    c.step = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.t_max = c.t_min;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.tau_collision = -1;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("TargetRoi.SideFormula") {
    RoiConfig cfg;
    cfg.base_side = 100;
    cfg.depth_gain = 1;
    cfg.ref_depth = 2;
    cfg.max_side = 1000;
    CHECK_EQ(roi_side(2.0, cfg), 200.0);
    cfg.min_side = 10;
    CHECK_NEAR(roi_side(1e-9, cfg), 100.0, 1e-6);
    cfg.base_side = 20;
    cfg.min_side = 48;
    CHECK_EQ(roi_side(0.0, cfg), 48.0);
}

TEST_CASE("TargetRoi.SideNonDecreasingInDepth") {
    RoiConfig cfg;
    double prev = 0.0;
    for (double d = 0.0; d < 20.0; d += 0.05) {
        const double s = roi_side(d, cfg);
        CHECK_GE(s, prev);
        prev = s;
    }
}

TEST_CASE("TargetRoi.ClampedAtLeftEdge") {
    const auto k = vga();
    IntersectionResult hit;
    hit.status = HitStatus::Hit;
    hit.pixel = {10.0, 240.0};
    hit.point3 = unproject(hit.pixel, 2.0, k);
    const BBox b = target_roi(hit, k, RoiConfig{});
    CHECK_EQ(b.x_min, 0.0);
    CHECK_EQ(b.x_max, 10.0 + 100.0);
    CHECK_EQ(b.y_min, 140.0);
}

TEST_CASE("TargetRoi.RejectsMiss") {
    CHECK_THROWS_AS(target_roi(IntersectionResult{}, vga(), RoiConfig{}), Error);
}

TEST_CASE("ContextCrop.Examples") {
    const ImageSize img{640, 480};
    const BBox target{10, 10, 50, 50};
    CHECK_EQ(context_crop(target, {20, 20, 30, 30}, img), target);
    CHECK_EQ(context_crop(target, {100, 100, 150, 150}, img), (BBox{10, 10, 150, 150}));
    CHECK_EQ(context_crop({-20, 10, 50, 50}, {600, 400, 700, 500}, img), (BBox{0, 10, 640, 480}));
}

TEST_CASE("ContextCrop.ContainsBothInputs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> c(0, 600);
    for (int i = 0; i < 200; ++i) {
        const double ax = c(rng), ay = c(rng) * 0.7, bx = c(rng), by = c(rng) * 0.7;
        const BBox a{ax, ay, ax + 30, ay + 30};
        const BBox b{bx, by, bx + 40, by + 40};
        const BBox h = context_crop(a, b, {640, 480});
        CHECK(h.contains(a));
        CHECK(h.contains(b));
    }
}

TEST_CASE("Iou.HandComputed") {
    CHECK_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
    CHECK_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
    // overlap 5x10 = 50, union 150
    CHECK_NEAR(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 50.0 / 150.0, 1e-12);
}
