#ifndef LORBPANO_SYNTH_HPP
#define LORBPANO_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lorbpano/compose.hpp"
#include "lorbpano/image.hpp"
#include "lorbpano/imgops.hpp"

namespace lorbpano {
namespace synth {

/// Seeded corner-rich texture: uniform noise smoothed a little and
/// contrast-stretched to the full 8-bit range.
inline ImageU8 texture(int width, int height, std::uint64_t seed, float smooth_sigma = 1.5f) {
    std::mt19937_64 rng(seed);
    ImageF32 noise(width, height, 1);
    for (auto& v : noise.data)
        v = static_cast<float>(rng() % 256);
    ImageF32 blurred = gaussian_blur(noise, smooth_sigma);
    float lo = blurred.data[0], hi = blurred.data[0];
    for (float v : blurred.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    ImageU8 out(width, height, 1, ColorSpace::Gray);
    const float scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = to_u8((blurred.data[i] - lo) * scale);
    return out;
}

/// Rotates about the image center by `degrees`, bilinear, clamp background.
inline ImageU8 rotate(const ImageU8& img, double degrees) {
    const double rad = degrees * M_PI / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    ImageU8 out(img.width, img.height, img.channels, img.color_space);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            // inverse rotation
            double dx = x - cx, dy = y - cy;
            double sx = c * dx + s * dy + cx;
            double sy = -s * dx + c * dy + cy;
            int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            double ax = sx - x0, ay = sy - y0;
            for (int ch = 0; ch < img.channels; ++ch) {
                double v00 = img.at_clamped(x0, y0, ch);
                double v10 = img.at_clamped(x0 + 1, y0, ch);
                double v01 = img.at_clamped(x0, y0 + 1, ch);
                double v11 = img.at_clamped(x0 + 1, y0 + 1, ch);
                out.at(x, y, ch) = to_u8(static_cast<float>(
                    (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11)));
            }
        }
    return out;
}

/// Rotates a point about the image center by `degrees` (forward direction,
/// matching rotate()).
inline std::pair<double, double> rotate_point(double x, double y, int width, int height,
                                              double degrees) {
    const double rad = degrees * M_PI / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    double dx = x - cx, dy = y - cy;
    return {c * dx - s * dy + cx, s * dx + c * dy + cy};
}

/// A two-camera scene cropped from one wide texture. true_h maps camera-1
/// coordinates into camera-0 coordinates (a pure horizontal translation).
struct PlantedPair {
    ImageU8 left;
    ImageU8 right;
    Homography true_h;
};

inline PlantedPair planted_pair(int width, int height, double overlap_fraction,
                                std::uint64_t seed) {
    const int shift = static_cast<int>(std::lround(width * (1.0 - overlap_fraction)));
    ImageU8 wide = texture(width + shift, height, seed);
    PlantedPair out;
    out.left = ImageU8(width, height, 1, ColorSpace::Gray);
    out.right = ImageU8(width, height, 1, ColorSpace::Gray);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            out.left.at(x, y) = wide.at(x, y);
            out.right.at(x, y) = wide.at(x + shift, y);
        }
    out.true_h = Homography::translation(shift, 0);
    return out;
}

/// Frame sequence for pipeline runs: a static planted pair with a small
/// deterministic bright square moving through the scene per frame.
inline std::vector<ImageU8> sequence_frame(const PlantedPair& scene, std::uint64_t frame) {
    std::vector<ImageU8> cams{scene.left, scene.right};
    const int w = scene.left.width, h = scene.left.height;
    const int size = std::max(4, h / 16);
    const int px = static_cast<int>((frame * 7) % static_cast<std::uint64_t>(w - size));
    const int py = static_cast<int>((frame * 3) % static_cast<std::uint64_t>(h - size));
    for (int y = py; y < py + size; ++y)
        for (int x = px; x < px + size; ++x) cams[0].at(x, y) = 255;
    // mirror the square into camera 1 where the overlap covers it
    const double shift = scene.true_h.h[2];
    for (int y = py; y < py + size; ++y)
        for (int x = px; x < px + size; ++x) {
            int rx = x - static_cast<int>(shift);
            if (rx >= 0 && rx < w) cams[1].at(rx, y) = 255;
        }
    return cams;
}

}  // namespace synth
}  // namespace lorbpano

#endif
