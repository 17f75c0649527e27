#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "lorbpano/lorb.hpp"
#include "lorbpano/matchlsh.hpp"
#include "lorbpano/synth.hpp"
#include "oracles.hpp"

using namespace lorbpano;

TEST_CASE("partition_regions strip arithmetic") {
    CameraLayout layout;
    layout.overlap_fraction = 0.25;
    std::vector<std::pair<int, int>> dims{{1000, 400}, {1000, 400}};
    SECTION("w=1000 f=0.25 gives [750,1000) and [0,250)") {
        auto regions = partition_regions(layout, dims, 0);
        REQUIRE(regions.size() == 2);
        CHECK(regions[0].x0 == 750);
        CHECK(regions[0].x1 == 1000);
        CHECK(regions[0].camera_id == 0);
        CHECK(regions[1].x0 == 0);
        CHECK(regions[1].x1 == 250);
        CHECK(regions[1].camera_id == 1);
    }
    SECTION("patch_half insets all sides") {
        auto regions = partition_regions(layout, dims, 15);
        CHECK(regions[0].x0 == 765);
        CHECK(regions[0].x1 == 985);
        CHECK(regions[0].y0 == 15);
        CHECK(regions[0].y1 == 385);
    }
    SECTION("f=1 covers full images") {
        layout.overlap_fraction = 1.0;
        auto regions = partition_regions(layout, dims, 0);
        CHECK(regions[0].x0 == 0);
        CHECK(regions[0].x1 == 1000);
        CHECK(regions[1].x1 == 1000);
    }
    SECTION("errors") {
        layout.overlap_fraction = 0.0;
        CHECK_THROWS_AS(partition_regions(layout, dims, 0), NoOverlap);
        layout.overlap_fraction = 1.5;
        CHECK_THROWS_AS(partition_regions(layout, dims, 0), OverlapExceedsImage);
    }
}

namespace {

DetectionRegion full_region(const ImageU8& img, int inset = 0) {
    return DetectionRegion{inset, inset, img.width - inset, img.height - inset, 0};
}

}  // namespace

TEST_CASE("fast_corners") {
    SECTION("constant image has none") {
        ImageU8 img(32, 32, 1, ColorSpace::Gray, 100);
        CHECK(fast_corners(img, full_region(img), 10, 9).empty());
    }
    SECTION("single bright pixel matches the exhaustive oracle") {
        ImageU8 img(32, 32, 1, ColorSpace::Gray, 0);
        img.at(10, 10) = 255;
        auto got = fast_corners(img, full_region(img), 10, 9);
        auto expect = oracles::fast_corners_brute(img, 0, 0, 32, 32, 10, 9);
        CHECK(got == expect);
    }
    SECTION("shallow ramp matches oracle (empty at arc 9)") {
        ImageU8 img(32, 32, 1);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) img.at(x, y) = static_cast<std::uint8_t>(4 * x);
        auto got = fast_corners(img, full_region(img), 10, 9);
        auto expect = oracles::fast_corners_brute(img, 0, 0, 32, 32, 10, 9);
        CHECK(got == expect);
        CHECK(got.empty());
    }
    SECTION("random textures match oracle for all arcs") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 5; ++trial) {
            ImageU8 img = synth::texture(48, 48, rng());
            for (int arc : {9, 12, 16}) {
                auto got = fast_corners(img, full_region(img), 20, arc);
                auto expect = oracles::fast_corners_brute(img, 0, 0, 48, 48, 20, arc);
                CHECK(got == expect);
            }
        }
    }
    SECTION("invariant under adding a constant (no clamping)") {
        ImageU8 img = synth::texture(48, 48, 5);
        ImageU8 shifted = img;
        for (auto& v : img.data) v = static_cast<std::uint8_t>(50 + (v * 100) / 255);
        for (std::size_t i = 0; i < img.data.size(); ++i)
            shifted.data[i] = static_cast<std::uint8_t>(img.data[i] + 50);
        CHECK(fast_corners(img, full_region(img), 10, 9) ==
              fast_corners(shifted, full_region(shifted), 10, 9));
    }
    SECTION("region too small throws") {
        ImageU8 img(8, 8, 1);
        CHECK_THROWS_AS(fast_corners(img, DetectionRegion{4, 4, 4, 4, 0}, 10, 9),
                        RegionTooSmall);
    }
}

TEST_CASE("harris_response") {
    SECTION("constant image gives zero") {
        ImageU8 img(32, 32, 1, ColorSpace::Gray, 77);
        auto r = harris_response(img, {{10, 10}, {16, 16}}, 0.04f, 1.0f);
        for (float v : r) CHECK(v == 0.0f);
    }
    SECTION("quadrant corner is positive and matches direct evaluation") {
        ImageU8 img(32, 32, 1, ColorSpace::Gray, 0);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) img.at(x, y) = 255;
        auto r = harris_response(img, {{15, 15}}, 0.04f, 1.0f);
        double expect = oracles::harris_direct(img, 15, 15, 0.04, 1.0);
        CHECK(r[0] > 0.0f);
        CHECK(r[0] == Catch::Approx(expect).epsilon(1e-5));
    }
    SECTION("vertical step edge is negative") {
        ImageU8 img(32, 32, 1, ColorSpace::Gray, 0);
        for (int y = 0; y < 32; ++y)
            for (int x = 16; x < 32; ++x) img.at(x, y) = 255;
        auto r = harris_response(img, {{16, 16}}, 0.04f, 1.0f);
        double expect = oracles::harris_direct(img, 16, 16, 0.04, 1.0);
        CHECK(r[0] < 0.0f);
        CHECK(r[0] == Catch::Approx(expect).epsilon(1e-5));
    }
    SECTION("random points match direct evaluation") {
        ImageU8 img = synth::texture(64, 64, 9);
        std::mt19937_64 rng(10);
        for (int i = 0; i < 20; ++i) {
            int x = 5 + static_cast<int>(rng() % 54), y = 5 + static_cast<int>(rng() % 54);
            auto r = harris_response(img, {{x, y}}, 0.04f, 1.0f);
            double expect = oracles::harris_direct(img, x, y, 0.04, 1.0);
            CHECK(r[0] == Catch::Approx(expect).epsilon(1e-4).margin(1e-3));
        }
    }
    SECTION("transpose invariance") {
        ImageU8 img = synth::texture(48, 48, 21);
        ImageU8 t(48, 48, 1);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x) t.at(y, x) = img.at(x, y);
        auto r1 = harris_response(img, {{12, 30}}, 0.04f, 1.0f);
        auto r2 = harris_response(t, {{30, 12}}, 0.04f, 1.0f);
        CHECK(r1[0] == Catch::Approx(r2[0]).epsilon(1e-5));
    }
    SECTION("window out of bounds throws") {
        ImageU8 img(32, 32, 1);
        CHECK_THROWS_AS(harris_response(img, {{2, 16}}, 0.04f, 1.0f), WindowOutOfBounds);
    }
}

TEST_CASE("nms") {
    SECTION("single point kept") {
        std::vector<Keypoint> pts{{5, 5, 1.0f, 0}};
        CHECK(nms(pts).size() == 1);
    }
    SECTION("weaker neighbor suppressed") {
        std::vector<Keypoint> pts{{5, 5, 5.0f, 0}, {6, 5, 3.0f, 0}};
        auto kept = nms(pts);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].response == 5.0f);
    }
    SECTION("random candidates with ties equal the brute-force oracle") {
        std::mt19937_64 rng(13);
        std::vector<Keypoint> pts;
        std::set<std::pair<int, int>> used;
        while (pts.size() < 50) {
            int x = static_cast<int>(rng() % 20), y = static_cast<int>(rng() % 20);
            if (!used.insert({x, y}).second) continue;
            pts.push_back({x, y, static_cast<float>(rng() % 5), 0});  // many ties
        }
        for (int radius : {1, 2, 3}) {
            auto got = nms(pts, radius);
            auto expect = oracles::nms_brute(pts, radius);
            REQUIRE(got.size() == expect.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].x == expect[i].x);
                CHECK(got[i].y == expect[i].y);
            }
        }
    }
}

TEST_CASE("select_top_n") {
    SECTION("fewer points than n returns all sorted") {
        std::vector<Keypoint> pts{{1, 1, 2.0f, 0}, {2, 2, 5.0f, 0}, {3, 3, 1.0f, 0}};
        auto got = select_top_n(pts, 5);
        REQUIRE(got.size() == 3);
        CHECK(got[0].response == 5.0f);
        CHECK(got[2].response == 1.0f);
    }
    SECTION("equal responses break ties by (y,x)") {
        std::vector<Keypoint> pts{{5, 2, 1.0f, 0}, {1, 2, 1.0f, 0}, {3, 1, 1.0f, 0}};
        auto got = select_top_n(pts, 3);
        CHECK(got[0].y == 1);
        CHECK(got[1].x == 1);
        CHECK(got[2].x == 5);
    }
    SECTION("1000 random scores equal the full-sort oracle prefix") {
        std::mt19937_64 rng(17);
        std::vector<Keypoint> pts;
        for (int i = 0; i < 1000; ++i)
            pts.push_back({static_cast<int>(rng() % 100), static_cast<int>(rng() % 100),
                           static_cast<float>(rng() % 50), 0});
        auto sorted = pts;
        std::stable_sort(sorted.begin(), sorted.end(), [](const Keypoint& a, const Keypoint& b) {
            if (a.response != b.response) return a.response > b.response;
            return std::make_pair(a.y, a.x) < std::make_pair(b.y, b.x);
        });
        auto got = select_top_n(pts, 100);
        REQUIRE(got.size() == 100);
        for (int i = 0; i < 100; ++i) {
            CHECK(got[i].response == sorted[i].response);
            CHECK(got[i].x == sorted[i].x);
            CHECK(got[i].y == sorted[i].y);
        }
    }
}

TEST_CASE("brief_pattern") {
    SECTION("same seed gives identical patterns") {
        auto a = brief_pattern(256, 15, 42);
        auto b = brief_pattern(256, 15, 42);
        REQUIRE(a.pairs.size() == b.pairs.size());
        for (std::size_t i = 0; i < a.pairs.size(); ++i) {
            CHECK(a.pairs[i].px == b.pairs[i].px);
            CHECK(a.pairs[i].qy == b.pairs[i].qy);
        }
        auto c = brief_pattern(256, 15, 43);
        bool all_same = true;
        for (std::size_t i = 0; i < a.pairs.size(); ++i)
            all_same &= a.pairs[i].px == c.pairs[i].px && a.pairs[i].py == c.pairs[i].py;
        CHECK_FALSE(all_same);
    }
    SECTION("all offsets stay inside the patch square") {
        auto pat = brief_pattern(10000, 15, 7);
        for (const auto& p : pat.pairs)
            for (int v : {p.px, p.py, p.qx, p.qy}) {
                CHECK(v >= -15);
                CHECK(v <= 15);
            }
    }
    SECTION("empirical std matches the truncated-Gaussian prediction within 5%") {
        const int patch_half = 15;
        const double sigma = patch_half / 2.5;
        // predicted std of round(N(0,sigma)) restricted to [-ph, ph]
        double norm = 0, var = 0;
        for (int v = -patch_half; v <= patch_half; ++v) {
            double lo = (v - 0.5) / sigma, hi = (v + 0.5) / sigma;
            double p = 0.5 * (std::erf(hi / std::sqrt(2.0)) - std::erf(lo / std::sqrt(2.0)));
            norm += p;
            var += p * v * v;
        }
        double predicted = std::sqrt(var / norm);
        auto pat = brief_pattern(25000, patch_half, 99);  // 100k coordinates
        double sum2 = 0;
        for (const auto& p : pat.pairs)
            sum2 += static_cast<double>(p.px) * p.px + static_cast<double>(p.py) * p.py +
                    static_cast<double>(p.qx) * p.qx + static_cast<double>(p.qy) * p.qy;
        double empirical = std::sqrt(sum2 / (4.0 * pat.pairs.size()));
        CHECK(empirical == Catch::Approx(predicted).epsilon(0.05));
    }
}

TEST_CASE("brief_descriptor") {
    auto pat = brief_pattern(256, 15, 1);
    SECTION("constant image gives all-zero trits") {
        ImageF32 img(64, 64, 1, ColorSpace::Gray, 10.0f);
        auto d = brief_descriptor(img, Keypoint{32, 32, 0, 0}, pat);
        for (int i = 0; i < 256; ++i) CHECK(d.trit(i) == 0);
    }
    SECTION("deterministic and shift-invariant") {
        ImageU8 tex = synth::texture(64, 64, 31);
        ImageF32 a = gaussian_blur(tex, 2.0f);
        ImageF32 b = a;
        for (auto& v : b.data) v += 20.0f;
        auto d1 = brief_descriptor(a, Keypoint{30, 30, 0, 0}, pat);
        auto d2 = brief_descriptor(a, Keypoint{30, 30, 0, 0}, pat);
        auto d3 = brief_descriptor(b, Keypoint{30, 30, 0, 0}, pat);
        CHECK(d1.gt == d2.gt);
        CHECK(d1.lt == d2.lt);
        CHECK(d1.gt == d3.gt);
        CHECK(d1.lt == d3.lt);
    }
    SECTION("bitplanes never overlap") {
        ImageF32 img = gaussian_blur(synth::texture(64, 64, 77), 2.0f);
        for (int x = 20; x < 44; x += 4) {
            auto d = brief_descriptor(img, Keypoint{x, x, 0, 0}, pat);
            for (int w = 0; w < Descriptor::words(d.n_d); ++w)
                CHECK((d.gt[w] & d.lt[w]) == 0);
        }
    }
    SECTION("patch out of bounds throws") {
        ImageF32 img(32, 32, 1);
        CHECK_THROWS_AS(brief_descriptor(img, Keypoint{5, 5, 0, 0}, pat), PatchOutOfBounds);
    }
}

TEST_CASE("extract_features") {
    ExtractionConfig cfg;
    cfg.top_n = 100;
    auto pat = brief_pattern(cfg.n_d, cfg.patch_half, 5);
    SECTION("constant image yields nothing") {
        ImageU8 img(128, 128, 1, ColorSpace::Gray, 128);
        auto feats = extract_features(img, {full_region(img, 15)}, cfg, pat);
        CHECK(feats.empty());
    }
    SECTION("keypoints stay inside their region") {
        ImageU8 img = synth::texture(256, 128, 123);
        DetectionRegion region{192 + 15, 15, 256 - 15, 128 - 15, 0};
        auto feats = extract_features(img, {region}, cfg, pat);
        CHECK_FALSE(feats.empty());
        for (const auto& f : feats) {
            CHECK(f.keypoint.region_id == 0);
            CHECK(region.contains(f.keypoint.x, f.keypoint.y));
        }
    }
    SECTION("equals the stage-by-stage composed oracle with full-image smoothing") {
        ImageU8 img = synth::texture(256, 256, 55);
        DetectionRegion region = full_region(img, 15);
        auto feats = extract_features(img, {region}, cfg, pat);

        auto corners = fast_corners(img, region, cfg.fast_threshold, cfg.fast_arc);
        auto responses = harris_response(img, corners, cfg.harris_alpha, cfg.harris_sigma);
        std::vector<Keypoint> candidates;
        for (std::size_t i = 0; i < corners.size(); ++i)
            if (responses[i] >= cfg.harris_threshold)
                candidates.push_back({corners[i].first, corners[i].second, responses[i], 0});
        auto expect_kps = select_top_n(nms(candidates), cfg.top_n);
        ImageF32 smoothed = gaussian_blur(img, cfg.brief_blur_sigma);

        REQUIRE(feats.size() == expect_kps.size());
        for (std::size_t i = 0; i < feats.size(); ++i) {
            CHECK(feats[i].keypoint.x == expect_kps[i].x);
            CHECK(feats[i].keypoint.y == expect_kps[i].y);
            auto expect_d = brief_descriptor(smoothed, expect_kps[i], pat);
            CHECK(feats[i].descriptor.gt == expect_d.gt);
            CHECK(feats[i].descriptor.lt == expect_d.lt);
        }
    }
}

TEST_CASE("descriptor rotation tolerance band") {
    // one-seed version; the acceptance suite runs three seeds
    ImageU8 img = synth::texture(256, 256, 2024);
    ExtractionConfig cfg;
    cfg.top_n = 150;
    auto pat = brief_pattern(cfg.n_d, cfg.patch_half, 2024);
    auto feats = extract_features(img, {full_region(img, 40)}, cfg, pat);
    REQUIRE(feats.size() > 50);

    auto match_rate = [&](double degrees) {
        ImageU8 rot = synth::rotate(img, degrees);
        ImageF32 rot_smoothed = gaussian_blur(rot, cfg.brief_blur_sigma);
        std::vector<Descriptor> orig, moved;
        for (const auto& f : feats) {
            auto [rx, ry] = synth::rotate_point(f.keypoint.x, f.keypoint.y, 256, 256, degrees);
            int ix = static_cast<int>(std::lround(rx)), iy = static_cast<int>(std::lround(ry));
            if (ix < 16 || ix >= 240 || iy < 16 || iy >= 240) continue;
            orig.push_back(f.descriptor);
            moved.push_back(brief_descriptor(rot_smoothed, Keypoint{ix, iy, 0, 0}, pat));
        }
        int mutual = 0;
        for (std::size_t i = 0; i < orig.size(); ++i) {
            int fwd = oracles::brute_nearest(moved, orig[i]);
            if (fwd == static_cast<int>(i) &&
                oracles::brute_nearest(orig, moved[i]) == static_cast<int>(i))
                ++mutual;
        }
        return static_cast<double>(mutual) / static_cast<double>(orig.size());
    };

    CHECK(match_rate(15.0) >= 0.70);
    CHECK(match_rate(45.0) < 0.20);
}
