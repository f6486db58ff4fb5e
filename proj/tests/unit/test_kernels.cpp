#include "check.hpp"

#include <cmath>
#include <numeric>

#include "clarifier/kernels.hpp"
#include "clarifier/scenegen.hpp"
#include "fixtures.hpp"

using namespace clarifier;

namespace {

GrayImage random_gray(int w, int h, std::uint64_t seed) {
    scenegen::Rng rng(seed);
    GrayImage g(w, h);
    for (auto& v : g.data) v = rng.uniform(0, 255);
    return g;
}

HandMask random_mask(int w, int h, std::uint64_t seed, double p) {
    scenegen::Rng rng(seed);
    HandMask m(w, h, 0);
    for (auto& v : m.data) v = rng.uniform() < p ? 1 : 0;
    return m;
}

bool same_nan_aware(double a, double b, double tol) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= tol;
}

}  // namespace

TEST_CASE("Kernels.LumaMatchesSerial") {
    const auto img = scenegen::texture_fixture(1);
    CHECK_EQ(kernels::luma(img), kernels::serial::luma(img));
    CHECK_EQ(kernels::luma(img), to_gray(img));
}

TEST_CASE("Kernels.LaplacianVarianceMatchesSerial") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto g = random_gray(97 + int(s), 61, s);
        CHECK_NEAR(kernels::laplacian_variance(g), kernels::serial::laplacian_variance(g), 1e-9);
    }
}

TEST_CASE("Kernels.BlurMatchesSerial") {
    const auto g = random_gray(120, 80, 3);
    for (double sigma : {0.0, 0.7, 2.0, 5.0}) {
        const auto a = kernels::gaussian_blur(g, sigma);
        const auto b = kernels::serial::gaussian_blur(g, sigma);
        REQUIRE_EQ(a.width, b.width);
        for (std::size_t i = 0; i < a.size(); ++i) REQUIRE_NEAR(a.data[i], b.data[i], 1e-9);
    }
    const auto rgb = scenegen::texture_fixture(2, 96, 64);
    CHECK_EQ(kernels::gaussian_blur(rgb, 1.5), kernels::serial::gaussian_blur(rgb, 1.5));
    CHECK_EQ(kernels::gaussian_blur(g, 0.0), g);
}

TEST_CASE("Kernels.BlurPreservesConstant") {
    const GrayImage g(40, 30, 42.0);
    for (const double v : kernels::gaussian_blur(g, 3.0).data) CHECK_NEAR(v, 42.0, 1e-9);
}

TEST_CASE("Kernels.MomentsMatchSerial") {
    const auto m = random_mask(130, 90, 5, 0.3);
    const auto a = kernels::mask_moments(m);
    const auto b = kernels::serial::mask_moments(m);
    CHECK_EQ(a.count, b.count);
    CHECK_EQ(a.count, mask_area(m));
    CHECK_NEAR(a.mean_x, b.mean_x, 1e-9);
    CHECK_NEAR(a.mean_y, b.mean_y, 1e-9);
    CHECK_NEAR(a.cxx, b.cxx, 1e-6);
    CHECK_NEAR(a.cyy, b.cyy, 1e-6);
    CHECK_NEAR(a.cxy, b.cxy, 1e-6);
}

TEST_CASE("Kernels.DilateMatchesSerial") {
    const auto m = random_mask(70, 50, 6, 0.02);
    for (int r : {0, 1, 3}) CHECK_EQ(kernels::dilate(m, r), kernels::serial::dilate(m, r));
    HandMask one(9, 9, 0);
    one.at(4, 4) = 1;
    CHECK_EQ(mask_area(kernels::dilate(one, 2)), 25u);
}

TEST_CASE("Kernels.ResidualProfileMatchesSerial") {
    const auto scene = scenegen::generate(clarifier::testing::gesture_spec(3));
    const Ray3& ray = scene.gt.ray;
    const RayGrid grid{0.05, 0.004, 2000};
    std::vector<double> a(grid.count), b(grid.count);
    kernels::residual_profile(ray, scene.depth, scene.k, grid, &scene.mask, a);
    kernels::serial::residual_profile(ray, scene.depth, scene.k, grid, &scene.mask, b);
    std::size_t finite = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        INFO(i);
        REQUIRE(same_nan_aware(a[i], b[i], 1e-12));
        finite += std::isfinite(a[i]) ? 1 : 0;
    }
    CHECK_GT(finite, grid.count / 2);
}

TEST_CASE("Kernels.GaussianTapsNormalised") {
    for (double s : {0.5, 1.0, 2.5, 8.0}) {
        const auto t = kernels::gaussian_taps(s);
        CHECK_EQ(t.size(), 2 * static_cast<std::size_t>(std::ceil(3 * s)) + 1);
        CHECK_NEAR(std::accumulate(t.begin(), t.end(), 0.0), 1.0, 1e-9);
        for (std::size_t i = 0; i < t.size() / 2; ++i) CHECK_EQ(t[i], t[t.size() - 1 - i]);
    }
}
