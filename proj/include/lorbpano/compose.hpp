#ifndef LORBPANO_COMPOSE_HPP
#define LORBPANO_COMPOSE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "lorbpano/homography.hpp"
#include "lorbpano/image.hpp"
#include "lorbpano/imgops.hpp"

namespace lorbpano {

/// Output raster geometry. Canvas pixel (x,y) corresponds to reference-frame
/// coordinate (x + origin_x, y + origin_y).
struct Canvas {
    int width = 0;
    int height = 0;
    int origin_x = 0;
    int origin_y = 0;
    std::vector<std::pair<int, int>> offsets;  // integral top-left of each warped image
};

/// Per-camera blend weight raster; weights over cameras sum to 1 wherever any
/// camera covers the pixel.
using BlendMask = ImageF32;

/// Bounding box of all warped image corners (homographies map each source
/// into the shared reference frame).
inline Canvas compute_canvas(const std::vector<std::pair<int, int>>& dims,
                             const std::vector<Homography>& homographies) {
    if (dims.empty() || dims.size() != homographies.size())
        throw BadParams("compute_canvas: dims/homographies size mismatch");
    double minx = std::numeric_limits<double>::max(), miny = minx;
    double maxx = std::numeric_limits<double>::lowest(), maxy = maxx;
    Canvas canvas;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (std::abs(homographies[i].det()) < 1e-9)
            throw SingularHomography("compute_canvas: singular homography");
        auto [w, h] = dims[i];
        double cminx = std::numeric_limits<double>::max(), cminy = cminx;
        for (auto [cx, cy] : {std::pair<double, double>{0, 0},
                              {static_cast<double>(w), 0},
                              {0, static_cast<double>(h)},
                              {static_cast<double>(w), static_cast<double>(h)}}) {
            auto [x, y] = homographies[i].apply(cx, cy);
            minx = std::min(minx, x);
            miny = std::min(miny, y);
            maxx = std::max(maxx, x);
            maxy = std::max(maxy, y);
            cminx = std::min(cminx, x);
            cminy = std::min(cminy, y);
        }
        canvas.offsets.emplace_back(static_cast<int>(std::floor(cminx)),
                                    static_cast<int>(std::floor(cminy)));
    }
    canvas.origin_x = static_cast<int>(std::floor(minx));
    canvas.origin_y = static_cast<int>(std::floor(miny));
    canvas.width = static_cast<int>(std::ceil(maxx)) - canvas.origin_x;
    canvas.height = static_cast<int>(std::ceil(maxy)) - canvas.origin_y;
    for (auto& [ox, oy] : canvas.offsets) {
        ox -= canvas.origin_x;
        oy -= canvas.origin_y;
    }
    return canvas;
}

/// Inverse mapping with bilinear sampling. Coverage is 1 where the
/// back-projected point lies inside the source, else value 0 / coverage 0.
inline std::pair<ImageF32, ImageF32> warp_image(const ImageF32& img, const Homography& h,
                                                const Canvas& canvas) {
    if (std::abs(h.det()) < 1e-9) throw SingularHomography("warp_image: singular homography");
    const Homography hinv = h.inverse();
    ImageF32 out(canvas.width, canvas.height, img.channels, img.color_space);
    ImageF32 coverage(canvas.width, canvas.height, 1);
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x) {
            auto [sx, sy] = hinv.apply(x + canvas.origin_x, y + canvas.origin_y);
            if (sx < 0.0 || sx > img.width - 1 || sy < 0.0 || sy > img.height - 1) continue;
            int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            double ax = sx - x0, ay = sy - y0;
            for (int c = 0; c < img.channels; ++c) {
                double v00 = img.at_clamped(x0, y0, c);
                double v10 = img.at_clamped(x0 + 1, y0, c);
                double v01 = img.at_clamped(x0, y0 + 1, c);
                double v11 = img.at_clamped(x0 + 1, y0 + 1, c);
                out.at(x, y, c) = static_cast<float>((1 - ay) * ((1 - ax) * v00 + ax * v10) +
                                                     ay * ((1 - ax) * v01 + ax * v11));
            }
            coverage.at(x, y) = 1.0f;
        }
    return {std::move(out), std::move(coverage)};
}

/// Feathering by per-row horizontal distance into each camera's coverage
/// (canvas border counts as uncovered), renormalized to sum 1 per covered
/// pixel. Cameras are horizontally adjacent, so the weight ramps linearly
/// across an overlap strip and is 1 in exclusive zones.
inline std::vector<BlendMask> linear_seam_mask(const std::vector<ImageF32>& coverages) {
    if (coverages.empty()) throw BadParams("linear_seam_mask: no coverage masks");
    const int w = coverages[0].width, h = coverages[0].height;
    std::vector<BlendMask> masks;
    for (const auto& cov : coverages) {
        if (cov.width != w || cov.height != h)
            throw MaskMismatch("linear_seam_mask: coverage dims differ");
        ImageF32 dist(w, h, 1);
        for (int y = 0; y < h; ++y) {
            float d = 0.0f;
            for (int x = 0; x < w; ++x) {
                d = cov.at(x, y) > 0.0f ? d + 1.0f : 0.0f;
                dist.at(x, y) = d;
            }
            d = 0.0f;
            for (int x = w - 1; x >= 0; --x) {
                d = cov.at(x, y) > 0.0f ? d + 1.0f : 0.0f;
                dist.at(x, y) = std::min(dist.at(x, y), d);
            }
        }
        masks.push_back(std::move(dist));
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float sum = 0.0f;
            for (const auto& m : masks) sum += m.at(x, y);
            if (sum > 0.0f)
                for (auto& m : masks) m.at(x, y) /= sum;
        }
    return masks;
}

/// Laplacian pyramid: L_k = G_k - upsample(G_{k+1}), top level = G_top.
inline Pyramid build_laplacian(const ImageF32& img, int levels) {
    if (levels < 1) throw TooManyLevels("build_laplacian: levels must be >= 1");
    Pyramid gauss = gaussian_pyramid(img, levels);
    Pyramid lap;
    for (int k = 0; k + 1 < levels; ++k) {
        ImageF32 up = upsample(gauss.levels[k + 1], gauss.levels[k].width,
                               gauss.levels[k].height);
        ImageF32 band = gauss.levels[k];
        for (std::size_t i = 0; i < band.data.size(); ++i) band.data[i] -= up.data[i];
        lap.levels.push_back(std::move(band));
    }
    lap.levels.push_back(gauss.levels.back());
    return lap;
}

inline ImageF32 collapse_laplacian(const Pyramid& p) {
    if (p.levels.empty()) throw TooManyLevels("collapse_laplacian: empty pyramid");
    ImageF32 acc = p.levels.back();
    for (int k = static_cast<int>(p.levels.size()) - 2; k >= 0; --k) {
        ImageF32 up = upsample(acc, p.levels[k].width, p.levels[k].height);
        acc = p.levels[k];
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += up.data[i];
    }
    return acc;
}

/// Per band: out_k = sum_c L_k(image_c) * G_k(mask_c); collapse, clamp to
/// [0,255]; pixels no mask covers come out 0.
inline ImageU8 multiband_blend(const std::vector<ImageF32>& images,
                               const std::vector<BlendMask>& masks, int levels) {
    if (images.empty() || images.size() != masks.size())
        throw MaskMismatch("multiband_blend: image/mask count mismatch");
    const int w = images[0].width, h = images[0].height, ch = images[0].channels;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (images[i].width != w || images[i].height != h || images[i].channels != ch ||
            masks[i].width != w || masks[i].height != h)
            throw MaskMismatch("multiband_blend: raster dims differ");

    std::vector<ImageF32> acc;       // per-level accumulators, lazily shaped
    std::vector<ImageF32> wsum;      // per-level blurred mask sums
    for (std::size_t c = 0; c < images.size(); ++c) {
        Pyramid lap = build_laplacian(images[c], levels);
        Pyramid mask_pyr = gaussian_pyramid(masks[c], levels);
        if (acc.empty())
            for (const auto& lvl : lap.levels) {
                acc.emplace_back(lvl.width, lvl.height, ch, images[0].color_space);
                wsum.emplace_back(lvl.width, lvl.height, 1);
            }
        for (int k = 0; k < levels; ++k) {
            const ImageF32& band = lap.levels[k];
            const ImageF32& mw = mask_pyr.levels[k];
            for (int y = 0; y < band.height; ++y)
                for (int x = 0; x < band.width; ++x) {
                    float wgt = mw.at(x, y);
                    wsum[k].at(x, y) += wgt;
                    for (int cc = 0; cc < ch; ++cc)
                        acc[k].at(x, y, cc) += wgt * band.at(x, y, cc);
                }
        }
    }
    // re-normalize each band where the blurred weights no longer sum to 1
    // (coverage boundaries); a no-op wherever the sum-to-1 invariant holds
    for (int k = 0; k < levels; ++k)
        for (int y = 0; y < acc[k].height; ++y)
            for (int x = 0; x < acc[k].width; ++x) {
                float s = wsum[k].at(x, y);
                if (s > 1e-6f && std::abs(s - 1.0f) > 1e-6f)
                    for (int cc = 0; cc < ch; ++cc) acc[k].at(x, y, cc) /= s;
            }
    Pyramid blended;
    blended.levels = std::move(acc);
    ImageF32 collapsed = collapse_laplacian(blended);
    ImageU8 out(w, h, ch, images[0].color_space);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float covered = 0.0f;
            for (const auto& m : masks) covered += m.at(x, y);
            for (int cc = 0; cc < ch; ++cc)
                out.at(x, y, cc) = covered > 0.0f ? to_u8(collapsed.at(x, y, cc)) : 0;
        }
    return out;
}

}  // namespace lorbpano

#endif
