#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lorbpano/compose.hpp"
#include "lorbpano/synth.hpp"

using namespace lorbpano;

TEST_CASE("compute_canvas") {
    SECTION("two 100x100 images, second shifted 75px right") {
        std::vector<std::pair<int, int>> dims = {{100, 100}, {100, 100}};
        std::vector<Homography> hs = {Homography::identity(),
                                      Homography::translation(75, 0)};
        Canvas c = compute_canvas(dims, hs);
        CHECK(c.width == 175);
        CHECK(c.height == 100);
        CHECK(c.origin_x == 0);
        CHECK(c.origin_y == 0);
        REQUIRE(c.offsets.size() == 2);
        CHECK(c.offsets[0] == std::pair<int, int>{0, 0});
        CHECK(c.offsets[1] == std::pair<int, int>{75, 0});
    }
    SECTION("random translations match a corner-projection oracle") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> shift(-50.0, 50.0);
        for (int trial = 0; trial < 20; ++trial) {
            double tx0 = shift(rng), ty0 = shift(rng);
            double tx1 = shift(rng), ty1 = shift(rng);
            std::vector<std::pair<int, int>> dims = {{64, 48}, {80, 40}};
            std::vector<Homography> hs = {Homography::translation(tx0, ty0),
                                          Homography::translation(tx1, ty1)};
            Canvas c = compute_canvas(dims, hs);
            double minx = std::min(tx0, tx1), miny = std::min(ty0, ty1);
            double maxx = std::max(tx0 + 64, tx1 + 80);
            double maxy = std::max(ty0 + 48, ty1 + 40);
            CHECK(c.origin_x == static_cast<int>(std::floor(minx)));
            CHECK(c.origin_y == static_cast<int>(std::floor(miny)));
            CHECK(c.width == static_cast<int>(std::ceil(maxx)) - c.origin_x);
            CHECK(c.height == static_cast<int>(std::ceil(maxy)) - c.origin_y);
        }
    }
    SECTION("errors") {
        CHECK_THROWS_AS(compute_canvas({}, {}), BadParams);
        Homography singular{{1, 0, 0, 2, 0, 0, 0, 0, 1}};
        CHECK_THROWS_AS(compute_canvas({{10, 10}}, {singular}), SingularHomography);
    }
}

TEST_CASE("warp_image") {
    ImageF32 img = to_f32(synth::texture(40, 30, 3));
    SECTION("identity reproduces the source where covered") {
        Canvas c{40, 30, 0, 0, {}};
        auto [out, cov] = warp_image(img, Homography::identity(), c);
        for (int y = 0; y < 30; ++y)
            for (int x = 0; x < 40; ++x) {
                CHECK(cov.at(x, y) == 1.0f);
                CHECK(out.at(x, y) == Catch::Approx(img.at(x, y)).margin(1e-4));
            }
    }
    SECTION("integer translation is an exact copy") {
        Canvas c{60, 40, 0, 0, {}};
        auto [out, cov] = warp_image(img, Homography::translation(10, 5), c);
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 60; ++x) {
                bool inside = x >= 10 && x < 50 && y >= 5 && y < 35;
                CHECK(cov.at(x, y) == (inside ? 1.0f : 0.0f));
                if (inside)
                    CHECK(out.at(x, y) == Catch::Approx(img.at(x - 10, y - 5)).margin(1e-4));
                else
                    CHECK(out.at(x, y) == 0.0f);
            }
    }
    SECTION("half-pixel shift of a ramp averages neighbors") {
        ImageF32 ramp(20, 8, 1);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 20; ++x) ramp.at(x, y) = 10.0f * x;
        Canvas c{20, 8, 0, 0, {}};
        auto [out, cov] = warp_image(ramp, Homography::translation(0.5, 0), c);
        for (int y = 0; y < 8; ++y)
            for (int x = 1; x < 19; ++x)
                CHECK(out.at(x, y) == Catch::Approx(10.0f * (x - 0.5f)).margin(1e-3));
    }
    SECTION("warp by T then by T inverse round-trips") {
        // smooth content: double bilinear resampling error scales with curvature
        ImageF32 smooth = to_f32(synth::texture(40, 30, 3, 4.0f));
        Homography t{{1.01, 0.02, 3.5, -0.015, 0.99, -2.25, 0, 0, 1}};
        Canvas big{80, 60, -20, -15, {}};
        auto [fwd, cov1] = warp_image(smooth, t, big);
        Canvas back{40, 30, 0, 0, {}};
        Homography shift = Homography::translation(big.origin_x, big.origin_y);
        auto [rt, cov2] = warp_image(fwd, t.inverse().compose(shift), back);
        // compare at interior pixels fully covered both ways
        int checked = 0;
        for (int y = 4; y < 26; ++y)
            for (int x = 4; x < 36; ++x) {
                auto [wx, wy] = t.apply(x, y);
                if (wx < big.origin_x + 2 || wx > big.origin_x + 77 ||
                    wy < big.origin_y + 2 || wy > big.origin_y + 57)
                    continue;
                if (cov2.at(x, y) != 1.0f) continue;
                CHECK(rt.at(x, y) == Catch::Approx(smooth.at(x, y)).margin(2.0));
                ++checked;
            }
        CHECK(checked > 200);
    }
    SECTION("singular homography throws") {
        Homography singular{{1, 0, 0, 2, 0, 0, 0, 0, 1}};
        Canvas c{40, 30, 0, 0, {}};
        CHECK_THROWS_AS(warp_image(img, singular, c), SingularHomography);
    }
}

TEST_CASE("linear_seam_mask") {
    SECTION("single camera gets weight 1 where covered") {
        ImageF32 cov(10, 4, 1);
        for (int y = 0; y < 4; ++y)
            for (int x = 2; x < 8; ++x) cov.at(x, y) = 1.0f;
        auto masks = linear_seam_mask({cov});
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 10; ++x)
                CHECK(masks[0].at(x, y) == ((x >= 2 && x < 8) ? 1.0f : 0.0f));
    }
    SECTION("identical coverages split 0.5/0.5") {
        ImageF32 cov(6, 3, 1, ColorSpace::Gray, 1.0f);
        auto masks = linear_seam_mask({cov, cov});
        for (float v : masks[0].data) CHECK(v == 0.5f);
        for (float v : masks[1].data) CHECK(v == 0.5f);
    }
    SECTION("overlap strip ramps linearly") {
        // A covers x in [0,8), B covers x in [4,12) on a 12-wide canvas
        ImageF32 ca(12, 2, 1), cb(12, 2, 1);
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 8; ++x) ca.at(x, y) = 1.0f;
            for (int x = 4; x < 12; ++x) cb.at(x, y) = 1.0f;
        }
        auto masks = linear_seam_mask({ca, cb});
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 4; ++x) {
                CHECK(masks[0].at(x, y) == Catch::Approx(1.0f).margin(1e-6));
                CHECK(masks[1].at(x, y) == Catch::Approx(0.0f).margin(1e-6));
            }
            for (int x = 4; x < 8; ++x) {
                CHECK(masks[0].at(x, y) ==
                      Catch::Approx((8.0f - x) / 5.0f).margin(1e-6));
                CHECK(masks[0].at(x, y) + masks[1].at(x, y) ==
                      Catch::Approx(1.0f).margin(1e-6));
            }
            for (int x = 8; x < 12; ++x)
                CHECK(masks[1].at(x, y) == Catch::Approx(1.0f).margin(1e-6));
        }
    }
    SECTION("mismatched dims throw") {
        CHECK_THROWS_AS(linear_seam_mask({ImageF32(4, 4, 1), ImageF32(5, 4, 1)}),
                        MaskMismatch);
        CHECK_THROWS_AS(linear_seam_mask({}), BadParams);
    }
}

TEST_CASE("laplacian pyramid") {
    ImageF32 img = to_f32(synth::texture(256, 256, 5));
    SECTION("one level is the image itself") {
        Pyramid p = build_laplacian(img, 1);
        REQUIRE(p.levels.size() == 1);
        CHECK(p.levels[0].data == img.data);
    }
    SECTION("collapse inverts build") {
        for (int levels : {2, 4, 5}) {
            Pyramid p = build_laplacian(img, levels);
            ImageF32 back = collapse_laplacian(p);
            REQUIRE(back.data.size() == img.data.size());
            for (std::size_t i = 0; i < img.data.size(); ++i)
                CHECK(back.data[i] == Catch::Approx(img.data[i]).margin(1e-3));
        }
    }
    SECTION("constant image has zero detail bands") {
        ImageF32 flat(64, 64, 1, ColorSpace::Gray, 77.0f);
        Pyramid p = build_laplacian(flat, 3);
        for (int k = 0; k < 2; ++k)
            for (float v : p.levels[k].data) CHECK(v == Catch::Approx(0.0f).margin(1e-3));
        for (float v : p.levels[2].data) CHECK(v == Catch::Approx(77.0f).margin(1e-3));
    }
}

TEST_CASE("multiband_blend") {
    SECTION("blending an image with itself is the identity up to rounding") {
        ImageF32 img = to_f32(synth::texture(64, 48, 9));
        BlendMask half(64, 48, 1, ColorSpace::Gray, 0.5f);
        ImageU8 out = multiband_blend({img, img}, {half, half}, 3);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 64; ++x)
                CHECK(std::abs(out.at(x, y) - img.at(x, y)) <= 1.0f);
    }
    SECTION("all-or-nothing masks select one image") {
        ImageF32 a = to_f32(synth::texture(32, 32, 1));
        ImageF32 b = to_f32(synth::texture(32, 32, 2));
        BlendMask one(32, 32, 1, ColorSpace::Gray, 1.0f);
        BlendMask zero(32, 32, 1);
        ImageU8 out = multiband_blend({a, b}, {one, zero}, 3);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                CHECK(std::abs(out.at(x, y) - a.at(x, y)) <= 1.0f);
    }
    SECTION("two constants blend within their range and monotonically") {
        ImageF32 dark(64, 16, 1, ColorSpace::Gray, 50.0f);
        ImageF32 bright(64, 16, 1, ColorSpace::Gray, 200.0f);
        // hard vertical seam at x = 32
        BlendMask ma(64, 16, 1), mb(64, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 64; ++x) {
                ma.at(x, y) = x < 32 ? 1.0f : 0.0f;
                mb.at(x, y) = 1.0f - ma.at(x, y);
            }
        ImageU8 out = multiband_blend({dark, bright}, {ma, mb}, 4);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 64; ++x) {
                CHECK(out.at(x, y) >= 49);
                CHECK(out.at(x, y) <= 201);
            }
            for (int x = 1; x < 64; ++x) CHECK(out.at(x, y) >= out.at(x - 1, y));
        }
        // the multi-band transition is gentler than the single-band step
        ImageU8 hard = multiband_blend({dark, bright}, {ma, mb}, 1);
        int max_step_multi = 0, max_step_hard = 0;
        for (int x = 1; x < 64; ++x) {
            max_step_multi = std::max(max_step_multi,
                                      std::abs(out.at(x, 8) - out.at(x - 1, 8)));
            max_step_hard = std::max(max_step_hard,
                                     std::abs(hard.at(x, 8) - hard.at(x - 1, 8)));
        }
        CHECK(max_step_hard == 150);
        CHECK(max_step_multi < max_step_hard / 2);
    }
    SECTION("camera order does not matter") {
        ImageF32 a = to_f32(synth::texture(48, 32, 3));
        ImageF32 b = to_f32(synth::texture(48, 32, 4));
        ImageF32 ca(48, 32, 1), cb(48, 32, 1);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 48; ++x) {
                ca.at(x, y) = x < 32 ? 1.0f : 0.0f;
                cb.at(x, y) = x >= 16 ? 1.0f : 0.0f;
            }
        auto masks = linear_seam_mask({ca, cb});
        ImageU8 ab = multiband_blend({a, b}, {masks[0], masks[1]}, 3);
        ImageU8 ba = multiband_blend({b, a}, {masks[1], masks[0]}, 3);
        for (std::size_t i = 0; i < ab.data.size(); ++i)
            CHECK(std::abs(ab.data[i] - ba.data[i]) <= 1);
    }
    SECTION("uncovered pixels are zero") {
        ImageF32 img(16, 16, 1, ColorSpace::Gray, 130.0f);
        BlendMask m(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 8; ++x) m.at(x, y) = 1.0f;
        ImageU8 out = multiband_blend({img}, {m}, 2);
        for (int y = 0; y < 16; ++y)
            for (int x = 8; x < 16; ++x) CHECK(out.at(x, y) == 0);
    }
    SECTION("mismatched inputs throw") {
        ImageF32 img(8, 8, 1);
        CHECK_THROWS_AS(multiband_blend({img}, {}, 2), MaskMismatch);
        CHECK_THROWS_AS(multiband_blend({img}, {BlendMask(9, 8, 1)}, 2), MaskMismatch);
    }
}
