#include "check.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "clarifier/scenegen.hpp"
#include "clarifier/serialize.hpp"
#include "clarifier/vision_quality.hpp"
#include "fixtures.hpp"

using namespace clarifier;

namespace {

GrayImage gray(int w, int h, double v = 0.0) { return GrayImage(w, h, v); }

/// Direct valid-region convolution with the 4-neighbour kernel, then
/// population variance.
double oracle_laplacian_variance(const GrayImage& g) {
    std::vector<double> r;
    for (int y = 1; y + 1 < g.height; ++y) {
        for (int x = 1; x + 1 < g.width; ++x) {
            r.push_back(g.at(x - 1, y) + g.at(x + 1, y) + g.at(x, y - 1) + g.at(x, y + 1) - 4 * g.at(x, y));
        }
    }
    double mean = 0;
    for (double v : r) mean += v;
    mean /= r.size();
    double var = 0;
    for (double v : r) var += (v - mean) * (v - mean);
    return var / r.size();
}

/// O(N^4) DFT with the spectrum centred by index shift.
double oracle_highfreq_ratio(const GrayImage& g, double rho) {
    const int h = g.height, w = g.width;
    const double radius = rho * std::min(h, w) / 2.0;
    double total = 0, outside = 0;
    for (int ky = 0; ky < h; ++ky) {
        for (int kx = 0; kx < w; ++kx) {
            if (kx == 0 && ky == 0) continue;
            std::complex<double> s = 0;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double a = -2 * std::numbers::pi * (double(kx) * x / w + double(ky) * y / h);
                    s += g.at(x, y) * std::complex<double>(std::cos(a), std::sin(a));
                }
            }
            const double e = std::norm(s);
            // signed frequency = distance from the centred DC bin
            const int fx = kx <= w / 2 ? kx : kx - w;
            const int fy = ky <= h / 2 ? ky : ky - h;
            total += e;
            if (std::hypot(fx, fy) > radius) outside += e;
        }
    }
    return total > 0 ? outside / total : 0.0;
}

std::set<Edge> edges_from(const nlohmann::json& arr) {
    std::set<Edge> out;
    for (const auto& e : arr) {
        const auto s = e.get<std::string>();
        if (s == "left") out.insert(Edge::Left);
        if (s == "right") out.insert(Edge::Right);
        if (s == "top") out.insert(Edge::Top);
        if (s == "bottom") out.insert(Edge::Bottom);
    }
    return out;
}

}  // namespace

TEST_CASE("LaplacianVariance.ConstantIsZero") { CHECK_EQ(laplacian_variance(gray(9, 9, 77.0)), 0.0); }

TEST_CASE("LaplacianVariance.StepEdgeMatchesHandConvolution") {
    GrayImage g = gray(5, 5);
    for (int y = 0; y < 5; ++y) {
        for (int x = 3; x < 5; ++x) g.at(x, y) = 100.0;  // vertical step of height 100
    }
    // Valid 3x3 responses: columns x=1,2,3 give 0, +100, -100 on every row.
    // mean 0, variance (0 + 100^2 + 100^2) / 3
    const double expected = 2.0 * 100.0 * 100.0 / 3.0;
    CHECK_NEAR(oracle_laplacian_variance(g), expected, 1e-9);
    CHECK_NEAR(laplacian_variance(g), expected, 1e-9);
}

TEST_CASE("LaplacianVariance.RandomImageMatchesOracle") {
    scenegen::Rng rng(4);
    GrayImage g = gray(23, 17);
    for (auto& v : g.data) v = rng.uniform(0, 255);
    CHECK_NEAR(laplacian_variance(g), oracle_laplacian_variance(g), 1e-6);
}

TEST_CASE("LaplacianVariance.TooSmall") { CHECK_THROWS_AS(laplacian_variance(gray(2, 5)), Error); }

TEST_CASE("LaplacianVariance.BlurReduces") {
    const auto img = scenegen::texture_fixture(3);
    const auto series = scenegen::gen_blur_series(img, {0, 1, 2, 4});
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        const double v = laplacian_variance(to_gray(s));
        CHECK_LT(v, prev);
        prev = v;
    }
}

TEST_CASE("FftRatio.ConstantIsZero") { CHECK_EQ(fft_highfreq_ratio(gray(8, 8, 5.0), 0.5), 0.0); }

TEST_CASE("FftRatio.NyquistCheckerboardIsOne") {
    GrayImage g = gray(8, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) g.at(x, y) = (x + y) % 2 ? 255.0 : 0.0;
    }
    CHECK_NEAR(oracle_highfreq_ratio(g, 0.5), 1.0, 1e-12);
    CHECK_NEAR(fft_highfreq_ratio(g, 0.5), 1.0, 1e-9);
}

TEST_CASE("FftRatio.MatchesNaiveDftOracle") {
    scenegen::Rng rng(9);
    for (auto [w, h] : {std::pair{8, 8}, std::pair{12, 9}, std::pair{16, 10}}) {
        GrayImage g = gray(w, h);
        for (auto& v : g.data) v = rng.uniform(0, 255);
        for (double rho : {0.25, 0.5, 0.8}) {
            const double r = fft_highfreq_ratio(g, rho);
            INFO(w << "x" << h << " rho " << rho);
            CHECK_NEAR(r, oracle_highfreq_ratio(g, rho), 1e-9);
            CHECK_GE(r, 0.0);
            CHECK_LE(r, 1.0);
        }
    }
}

TEST_CASE("FftRatio.TooSmall") { CHECK_THROWS_AS(fft_highfreq_ratio(gray(7, 8), 0.5), Error); }

TEST_CASE("ClarityScore.Examples") {
    QualityConfig cfg;
    CHECK_EQ(clarity_score(cfg.lap_hi * 2, cfg.fft_hi, cfg), 1.0);
    CHECK_EQ(clarity_score(0.0, cfg.fft_lo, cfg), 0.0);
    const double lap = cfg.lap_lo + 0.4 * (cfg.lap_hi - cfg.lap_lo);
    const double fft = cfg.fft_lo + 0.8 * (cfg.fft_hi - cfg.fft_lo);
    CHECK_NEAR(clarity_score(lap, fft, cfg), 0.6, 1e-12);
}

TEST_CASE("ClarityScore.ConstantImageScoresZero") {
    const auto r = assess_clarity(gray(32, 32, 128.0), QualityConfig{});
    CHECK_EQ(r.score, 0.0);
}

TEST_CASE("QualityConfig.Validation") {
    QualityConfig c;
    c.w_lap = 0.7;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.tau_small = 0.7;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.lap_hi = c.lap_lo;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.rho = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("Framing.Examples") {
    QualityConfig cfg;
    const ImageSize img{1000, 1000};
    const auto ok = assess_framing({276, 276, 724, 724}, img, cfg);  // ~0.2
    CHECK_EQ(ok.verdict, FramingVerdict::Ok);
    const auto small = assess_framing({450, 450, 550, 550}, img, cfg);  // 0.01
    CHECK_EQ(small.verdict, FramingVerdict::TooSmall);
    CHECK_NEAR(small.area_ratio, 0.01, 1e-12);
    const auto large = assess_framing({50, 50, 950, 950}, img, cfg);
    CHECK_EQ(large.verdict, FramingVerdict::TooLarge);
    const auto clipped = assess_framing({cfg.edge_margin_px(img), 300, 400, 700}, img, cfg);
    CHECK_EQ(clipped.verdict, FramingVerdict::Clipped);
    CHECK(clipped.clipped_edges.contains(Edge::Left));
}

TEST_CASE("Guidance.TooLargeSaysFurther") {
    FramingReport f;
    f.area_ratio = 0.8;
    f.verdict = FramingVerdict::TooLarge;
    const auto g = generate_guidance(f, ClarityReport{0, 0, 1.0}, QualityConfig{});
    REQUIRE_EQ(g.size(), 1u);
    CHECK_EQ(g[0].code, GuidanceCode::MoveFurther);
    CHECK_NE(g[0].text.find("further"), std::string::npos);
}

TEST_CASE("Guidance.NotFoundAimsAtTarget") {
    const auto g = generate_guidance(not_found_framing(), std::nullopt, QualityConfig{});
    REQUIRE_EQ(g.size(), 1u);
    CHECK_EQ(g[0].code, GuidanceCode::AimAtTarget);
}

TEST_CASE("Guidance.ComponentsDerivableFromCode") {
    for (auto c : {GuidanceCode::MoveCloser, GuidanceCode::MoveFurther, GuidanceCode::PanLeft, GuidanceCode::PanRight,
                   GuidanceCode::PanUp, GuidanceCode::PanDown, GuidanceCode::HoldSteady, GuidanceCode::Ok}) {
        const auto m = make_guidance(c);
        CHECK_EQ(guidance_code_from_string(to_string(c)), c);
        CHECK_EQ(m.direction_components.empty(), c == GuidanceCode::Ok);
    }
}

TEST_CASE("Guidance.GoldenRuleTable") {
    std::ifstream in(clarifier::testing::golden_dir() / "guidance_table.json");
    REQUIRE(in.good());
    const auto table = nlohmann::json::parse(in);
    QualityConfig cfg;
    int n = 0;
    for (const auto& c : table.at("cases")) {
        FramingReport f;
        f.area_ratio = c.at("area_ratio");
        f.clipped_edges = edges_from(c.at("clipped"));
        if (!f.clipped_edges.empty()) {
            f.verdict = FramingVerdict::Clipped;
        } else if (f.area_ratio < cfg.tau_small) {
            f.verdict = FramingVerdict::TooSmall;
        } else if (f.area_ratio > cfg.tau_large) {
            f.verdict = FramingVerdict::TooLarge;
        } else {
            f.verdict = FramingVerdict::Ok;
        }
        ClarityReport cl;
        cl.score = c.at("blurry").get<bool>() ? table.at("clarity_score_blurry").get<double>()
                                              : table.at("clarity_score_sharp").get<double>();
        const auto got = generate_guidance(f, cl, cfg);
        std::vector<std::string> got_codes, want_codes;
        for (const auto& m : got) got_codes.emplace_back(to_string(m.code));
        for (const auto& e : c.at("expected")) want_codes.push_back(e.at("code"));
        INFO(c.dump());
        CHECK_EQ(got_codes, want_codes);
        for (std::size_t i = 0; i < std::min(got.size(), c.at("expected").size()); ++i) {
            CHECK_EQ(got[i].direction_components, directions_from_json(c.at("expected")[i].at("direction_components")));
        }
        ++n;
    }
    CHECK_EQ(n, 96);
}

TEST_CASE("AssessTarget.NoDetection") {
    const RgbImage img(64, 48);
    const auto a = assess_target(img, std::nullopt, QualityConfig{});
    CHECK_EQ(a.framing.verdict, FramingVerdict::NotFound);
    REQUIRE_EQ(a.guidance.size(), 1u);
    CHECK_EQ(a.guidance[0].code, GuidanceCode::AimAtTarget);
    CHECK_FALSE(a.clarity.has_value());
}

TEST_CASE("AssessTarget.SharpFixtureOkBlurredHoldsSteady") {
    scenegen::SceneSpec s;
    s.seed = 21;
    scenegen::TargetSpec t;
    t.label = "menu";
    t.x0 = 200;
    t.y0 = 140;
    t.x1 = 440;
    t.y1 = 340;
    t.depth = 1.5;
    t.period = 10;
    s.targets.push_back(t);
    const auto scene = scenegen::generate(s);
    const auto sharp = assess_target(scene.image, t.box(), QualityConfig{});
    CHECK(sharp.ok());
    const auto blurred = scenegen::gen_blur_series(scene.image, {6.0}).front();
    const auto b = assess_target(blurred, t.box(), QualityConfig{});
    bool hold = false;
    for (const auto& m : b.guidance) hold |= m.code == GuidanceCode::HoldSteady;
    CHECK(hold);
}

TEST_CASE("AssessTarget.ClarityMonotoneAlongBlurSeries") {
    QualityConfig cfg;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto series = scenegen::gen_blur_series(scenegen::texture_fixture(seed), {0, 1, 2, 4, 6, 8});
        double prev = 2.0;
        for (const auto& im : series) {
            const double s = assess_clarity(to_gray(im), cfg).score;
            CHECK_GE(s, 0.0);
            CHECK_LE(s, 1.0);
            if (prev > 0.0) {
                INFO("seed " << seed);
                CHECK_LT(s, prev);
            } else {
                CHECK_EQ(s, 0.0);
            }
            prev = s;
        }
    }
}

TEST_CASE("DirectionsFromText.KeywordTable") {
    CHECK_EQ(directions_from_text("Move the camera up and to the left"), (DirectionSet{Direction::Up, Direction::Left}));
    CHECK_EQ(directions_from_text("Please step back a bit"), (DirectionSet{Direction::Further}));
    CHECK_EQ(directions_from_text("Get closer"), (DirectionSet{Direction::Closer}));
    CHECK_EQ(directions_from_text("Hold steady"), (DirectionSet{Direction::Steady}));
    CHECK(directions_from_text("Looks great").empty());
}
