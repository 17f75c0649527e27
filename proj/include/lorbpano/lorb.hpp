#ifndef LORBPANO_LORB_HPP
#define LORBPANO_LORB_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "lorbpano/image.hpp"
#include "lorbpano/imgops.hpp"

namespace lorbpano {

struct Keypoint {
    int x = 0;
    int y = 0;
    float response = 0.0f;
    int region_id = 0;
};

/// Inclusive-exclusive pixel rectangle on one camera image.
struct DetectionRegion {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int camera_id = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct BriefPattern {
    struct Pair {
        int px, py, qx, qy;
    };
    std::vector<Pair> pairs;
    int patch_half = 15;
    std::uint64_t seed = 0;
};

/// Ternary BRIEF code: trit i is +1 iff gt bit i set, -1 iff lt bit i set, else 0.
/// Invariant: gt & lt == 0. Fixed storage sized for n_d up to 512.
struct Descriptor {
    static constexpr int kMaxWords = 8;

    int n_d = 0;
    std::array<std::uint64_t, kMaxWords> gt{};
    std::array<std::uint64_t, kMaxWords> lt{};

    static int words(int n_d) { return (n_d + 63) / 64; }

    explicit Descriptor(int nd = 0) : n_d(nd) { assert(nd <= kMaxWords * 64); }

    void set_trit(int i, int value) {
        std::uint64_t bit = std::uint64_t{1} << (i % 64);
        if (value > 0)
            gt[i / 64] |= bit;
        else if (value < 0)
            lt[i / 64] |= bit;
    }
    int trit(int i) const {
        std::uint64_t bit = std::uint64_t{1} << (i % 64);
        if (gt[i / 64] & bit) return 1;
        if (lt[i / 64] & bit) return -1;
        return 0;
    }
};

struct ExtractionConfig {
    std::uint8_t fast_threshold = 20;
    int fast_arc = 9;           // contiguous circle pixels, in [9,16]
    float harris_alpha = 0.04f;
    float harris_threshold = 0.0f;
    float harris_sigma = 1.0f;
    int top_n = 500;            // max keypoints per region
    int n_d = 256;              // descriptor pairs, in [64,512]
    float brief_blur_sigma = 2.0f;
    int patch_half = 15;

    void validate() const {
        if (fast_arc < 9 || fast_arc > 16) throw BadParams("fast_arc must be in [9,16]");
        if (top_n < 4) throw BadParams("top_n must be >= 4");
        if (n_d < 64 || n_d > 512) throw BadParams("n_d must be in [64,512]");
        if (!(harris_sigma > 0.0f)) throw InvalidSigma("harris_sigma must be > 0");
        if (!(brief_blur_sigma > 0.0f)) throw InvalidSigma("brief_blur_sigma must be > 0");
        if (patch_half < 1) throw BadParams("patch_half must be >= 1");
    }
};

/// Overlap declaration between horizontally adjacent cameras.
struct CameraLayout {
    double overlap_fraction = 0.25;  // in (0,1]
    std::vector<DetectionRegion> explicit_regions;  // overrides fraction when non-empty
};

/// Per adjacent camera pair, the left image gets its right strip and the
/// right image its left strip, each inset by patch_half before detection.
inline std::vector<DetectionRegion> partition_regions(
    const CameraLayout& layout, const std::vector<std::pair<int, int>>& image_dims,
    int patch_half) {
    if (!layout.explicit_regions.empty()) {
        auto regions = layout.explicit_regions;
        for (auto& r : regions) {
            r.x0 += patch_half;
            r.y0 += patch_half;
            r.x1 -= patch_half;
            r.y1 -= patch_half;
            if (r.x0 >= r.x1 || r.y0 >= r.y1)
                throw RegionTooSmall("explicit region smaller than 2*patch_half");
        }
        return regions;
    }
    const double f = layout.overlap_fraction;
    if (f <= 0.0) throw NoOverlap("overlap fraction must be > 0");
    if (f > 1.0) throw OverlapExceedsImage("overlap fraction must be <= 1");
    std::vector<DetectionRegion> regions;
    for (std::size_t i = 0; i + 1 < image_dims.size(); ++i) {
        auto [wl, hl] = image_dims[i];
        auto [wr, hr] = image_dims[i + 1];
        DetectionRegion left{static_cast<int>(std::lround(wl * (1.0 - f))), 0, wl, hl,
                             static_cast<int>(i)};
        DetectionRegion right{0, 0, static_cast<int>(std::lround(wr * f)), hr,
                              static_cast<int>(i + 1)};
        for (DetectionRegion* r : {&left, &right}) {
            r->x0 += patch_half;
            r->y0 += patch_half;
            r->x1 -= patch_half;
            r->y1 -= patch_half;
            if (r->x0 >= r->x1 || r->y0 >= r->y1)
                throw RegionTooSmall("overlap strip smaller than 2*patch_half");
        }
        regions.push_back(left);
        regions.push_back(right);
    }
    return regions;
}

/// Radius-3 Bresenham ring, clockwise from (0,-3).
inline const std::array<std::pair<int, int>, 16>& fast_ring() {
    static const std::array<std::pair<int, int>, 16> ring = {{{0, -3},
                                                              {1, -3},
                                                              {2, -2},
                                                              {3, -1},
                                                              {3, 0},
                                                              {3, 1},
                                                              {2, 2},
                                                              {1, 3},
                                                              {0, 3},
                                                              {-1, 3},
                                                              {-2, 2},
                                                              {-3, 1},
                                                              {-3, 0},
                                                              {-3, -1},
                                                              {-2, -2},
                                                              {-1, -3}}};
    return ring;
}

namespace detail {

/// Longest contiguous run (with wraparound) of set flags on the 16-ring.
inline int longest_arc(unsigned mask) {
    if (mask == 0xFFFFu) return 16;
    int best = 0, run = 0;
    for (int i = 0; i < 32; ++i) {  // doubled scan handles wraparound
        if (mask & (1u << (i % 16))) {
            ++run;
            best = std::max(best, run);
        } else {
            run = 0;
        }
    }
    return std::min(best, 16);
}

inline bool fast_segment_test(const ImageU8& img, int x, int y, int threshold, int arc) {
    const auto& ring = fast_ring();
    const int center = img.at(x, y);
    unsigned brighter = 0, darker = 0;
    for (int i = 0; i < 16; ++i) {
        int v = img.at(x + ring[i].first, y + ring[i].second);
        if (v > center + threshold) brighter |= 1u << i;
        if (v < center - threshold) darker |= 1u << i;
    }
    return longest_arc(brighter) >= arc || longest_arc(darker) >= arc;
}

}  // namespace detail

inline std::vector<std::pair<int, int>> fast_corners(const ImageU8& img,
                                                     const DetectionRegion& region,
                                                     std::uint8_t threshold, int arc) {
    if (img.channels != 1) throw UnsupportedFormat("fast_corners: grayscale input required");
    const int x0 = std::max(region.x0, 3), x1 = std::min(region.x1, img.width - 3);
    const int y0 = std::max(region.y0, 3), y1 = std::min(region.y1, img.height - 3);
    if (x0 >= x1 || y0 >= y1) throw RegionTooSmall("fast_corners: region too small");
    std::vector<std::pair<int, int>> corners;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            if (detail::fast_segment_test(img, x, y, threshold, arc))
                corners.emplace_back(x, y);
    return corners;
}

/// R = det(M) - alpha * trace(M)^2 over a normalized Gaussian window of
/// gradient products, evaluated at each query point.
inline std::vector<float> harris_response(const ImageU8& img,
                                          const std::vector<std::pair<int, int>>& points,
                                          float alpha, float sigma) {
    if (img.channels != 1) throw UnsupportedFormat("harris_response: grayscale input required");
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    const double s2 = 2.0 * static_cast<double>(sigma) * sigma;
    // window weights, normalized to sum 1; double precision keeps the
    // det/trace cancellation well inside the documented tolerance
    std::vector<double> w((2 * radius + 1) * (2 * radius + 1));
    {
        double sum = 0.0;
        for (int v = -radius; v <= radius; ++v)
            for (int u = -radius; u <= radius; ++u) {
                double g = std::exp(-(u * u + v * v) / s2);
                w[(v + radius) * (2 * radius + 1) + (u + radius)] = g;
                sum += g;
            }
        for (double& x : w) x /= sum;
    }
    std::vector<float> responses;
    responses.reserve(points.size());
    for (auto [px, py] : points) {
        // central differences need one extra pixel beyond the window
        if (px - radius - 1 < 0 || px + radius + 1 >= img.width || py - radius - 1 < 0 ||
            py + radius + 1 >= img.height)
            throw WindowOutOfBounds("harris_response: window does not fit");
        double a = 0.0, b = 0.0, c = 0.0;
        for (int v = -radius; v <= radius; ++v)
            for (int u = -radius; u <= radius; ++u) {
                int x = px + u, y = py + v;
                double ix = (static_cast<double>(img.at(x + 1, y)) - img.at(x - 1, y)) / 2.0;
                double iy = (static_cast<double>(img.at(x, y + 1)) - img.at(x, y - 1)) / 2.0;
                double wt = w[(v + radius) * (2 * radius + 1) + (u + radius)];
                a += wt * ix * ix;
                b += wt * iy * iy;
                c += wt * ix * iy;
            }
        responses.push_back(
            static_cast<float>((a * b - c * c) - alpha * (a + b) * (a + b)));
    }
    return responses;
}

/// Keep a point iff its response beats every candidate within Chebyshev
/// distance <= radius; exact ties go to the smaller (y,x).
inline std::vector<Keypoint> nms(const std::vector<Keypoint>& candidates, int radius = 1) {
    if (candidates.empty()) return {};
    int minx = candidates[0].x, maxx = candidates[0].x;
    int miny = candidates[0].y, maxy = candidates[0].y;
    for (const auto& k : candidates) {
        minx = std::min(minx, k.x);
        maxx = std::max(maxx, k.x);
        miny = std::min(miny, k.y);
        maxy = std::max(maxy, k.y);
    }
    const int w = maxx - minx + 1, h = maxy - miny + 1;
    std::vector<int> grid(static_cast<std::size_t>(w) * h, -1);
    for (std::size_t i = 0; i < candidates.size(); ++i)
        grid[static_cast<std::size_t>(candidates[i].y - miny) * w +
             (candidates[i].x - minx)] = static_cast<int>(i);
    std::vector<Keypoint> kept;
    for (const auto& k : candidates) {
        bool wins = true;
        for (int dy = -radius; dy <= radius && wins; ++dy)
            for (int dx = -radius; dx <= radius && wins; ++dx) {
                if (dx == 0 && dy == 0) continue;
                int gx = k.x - minx + dx, gy = k.y - miny + dy;
                if (gx < 0 || gx >= w || gy < 0 || gy >= h) continue;
                int j = grid[static_cast<std::size_t>(gy) * w + gx];
                if (j < 0) continue;
                const Keypoint& o = candidates[j];
                if (o.response > k.response ||
                    (o.response == k.response &&
                     std::make_pair(o.y, o.x) < std::make_pair(k.y, k.x)))
                    wins = false;
            }
        if (wins) kept.push_back(k);
    }
    return kept;
}

/// Descending by response, ties by (y,x) ascending; at most n returned.
inline std::vector<Keypoint> select_top_n(std::vector<Keypoint> points, int n) {
    if (n < 1) throw BadParams("select_top_n: n must be >= 1");
    std::sort(points.begin(), points.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.response != b.response) return a.response > b.response;
        return std::make_pair(a.y, a.x) < std::make_pair(b.y, b.x);
    });
    if (static_cast<int>(points.size()) > n) points.resize(n);
    return points;
}

/// Point pairs drawn i.i.d. from an isotropic Gaussian (sigma = patch_half/2.5),
/// rejection-sampled into [-patch_half, patch_half]^2. Same seed, same pattern.
inline BriefPattern brief_pattern(int n_d, int patch_half, std::uint64_t seed) {
    if (n_d < 1) throw BadParams("brief_pattern: n_d must be >= 1");
    BriefPattern pat;
    pat.patch_half = patch_half;
    pat.seed = seed;
    pat.pairs.reserve(n_d);
    std::mt19937_64 rng(seed);
    const double sigma = patch_half / 2.5;
    auto next_coord = [&]() {
        // Box-Muller, one coordinate at a time, rejected into the square
        for (;;) {
            double u1 = (static_cast<double>(rng()) + 1.0) / (static_cast<double>(rng.max()) + 2.0);
            double u2 = static_cast<double>(rng()) / (static_cast<double>(rng.max()) + 1.0);
            double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2) * sigma;
            int v = static_cast<int>(std::lround(g));
            if (v >= -patch_half && v <= patch_half) return v;
        }
    };
    for (int i = 0; i < n_d; ++i) {
        BriefPattern::Pair p;
        p.px = next_coord();
        p.py = next_coord();
        p.qx = next_coord();
        p.qy = next_coord();
        pat.pairs.push_back(p);
    }
    return pat;
}

/// Ternary BRIEF on the pre-smoothed image: +1 if I(p) > I(q), -1 if <, else 0.
inline Descriptor brief_descriptor(const ImageF32& smoothed, const Keypoint& kp,
                                   const BriefPattern& pat) {
    const int ph = pat.patch_half;
    if (kp.x - ph < 0 || kp.x + ph >= smoothed.width || kp.y - ph < 0 ||
        kp.y + ph >= smoothed.height)
        throw PatchOutOfBounds("brief_descriptor: patch does not fit");
    Descriptor d(static_cast<int>(pat.pairs.size()));
    for (std::size_t i = 0; i < pat.pairs.size(); ++i) {
        const auto& p = pat.pairs[i];
        float ip = smoothed.at(kp.x + p.px, kp.y + p.py);
        float iq = smoothed.at(kp.x + p.qx, kp.y + p.qy);
        if (ip > iq)
            d.set_trit(static_cast<int>(i), 1);
        else if (ip < iq)
            d.set_trit(static_cast<int>(i), -1);
    }
    return d;
}

struct Feature {
    Keypoint keypoint;
    Descriptor descriptor;
};

namespace detail {

/// Blur only the sub-rectangle needed for a region's descriptors. The crop is
/// expanded by patch_half plus the blur kernel radius so values match a
/// full-image blur exactly wherever they are sampled.
struct SmoothedCrop {
    ImageF32 img;
    int off_x = 0, off_y = 0;

    float at_global(int x, int y) const { return img.at(x - off_x, y - off_y); }
};

inline SmoothedCrop smoothed_crop(const ImageU8& img, const DetectionRegion& region,
                                  int patch_half, float sigma) {
    const int margin = patch_half + static_cast<int>(std::ceil(3.0f * sigma));
    const int x0 = std::max(0, region.x0 - margin);
    const int y0 = std::max(0, region.y0 - margin);
    const int x1 = std::min(img.width, region.x1 + margin);
    const int y1 = std::min(img.height, region.y1 + margin);
    ImageF32 crop(x1 - x0, y1 - y0, 1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) crop.at(x - x0, y - y0) = img.at(x, y);
    // crops touching the image border must clamp to the image edge, which the
    // crop edge coincides with there
    return SmoothedCrop{gaussian_blur(crop, sigma), x0, y0};
}

}  // namespace detail

/// Algorithm: FAST -> Harris -> threshold -> NMS -> top-N per region -> BRIEF.
/// region_id on each keypoint is the index into `regions`.
inline std::vector<Feature> extract_features(const ImageU8& img,
                                             const std::vector<DetectionRegion>& regions,
                                             const ExtractionConfig& cfg,
                                             const BriefPattern& pat) {
    cfg.validate();
    std::vector<Feature> features;
    for (std::size_t ri = 0; ri < regions.size(); ++ri) {
        const DetectionRegion& region = regions[ri];
        auto corners = fast_corners(img, region, cfg.fast_threshold, cfg.fast_arc);
        if (corners.empty()) continue;
        auto responses = harris_response(img, corners, cfg.harris_alpha, cfg.harris_sigma);
        std::vector<Keypoint> candidates;
        for (std::size_t i = 0; i < corners.size(); ++i)
            if (responses[i] >= cfg.harris_threshold)
                candidates.push_back(Keypoint{corners[i].first, corners[i].second,
                                              responses[i], static_cast<int>(ri)});
        auto selected = select_top_n(nms(candidates), cfg.top_n);
        if (selected.empty()) continue;
        auto crop = detail::smoothed_crop(img, region, cfg.patch_half, cfg.brief_blur_sigma);
        for (const Keypoint& kp : selected) {
            Keypoint local{kp.x - crop.off_x, kp.y - crop.off_y, kp.response, kp.region_id};
            features.push_back(Feature{kp, brief_descriptor(crop.img, local, pat)});
        }
    }
    return features;
}

}  // namespace lorbpano

#endif
