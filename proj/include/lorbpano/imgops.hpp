#ifndef LORBPANO_IMGOPS_HPP
#define LORBPANO_IMGOPS_HPP

#include <cmath>
#include <vector>

#include "lorbpano/image.hpp"

namespace lorbpano {

/// Gradients by central differences, one-sided on the borders.
struct GradientPair {
    ImageF32 ix;
    ImageF32 iy;
};

/// Gaussian pyramid; level 0 is full resolution, dims halve (floor) per level.
struct Pyramid {
    std::vector<ImageF32> levels;
};

inline ImageU8 to_grayscale(const ImageU8& img) {
    if (img.channels == 1) return img;
    if (img.channels != 3) throw UnsupportedFormat("to_grayscale: channels must be 1 or 3");
    ImageU8 out(img.width, img.height, 1, ColorSpace::Gray);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            float luma = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) +
                         0.114f * img.at(x, y, 2);
            out.at(x, y) = to_u8(luma);
        }
    return out;
}

inline std::vector<float> gaussian_kernel(float sigma) {
    if (!(sigma > 0.0f)) throw InvalidSigma("gaussian kernel: sigma must be > 0");
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    std::vector<float> k(2 * radius + 1);
    float sum = 0.0f;
    for (int i = -radius; i <= radius; ++i) {
        float v = std::exp(-(static_cast<float>(i) * i) / (2.0f * sigma * sigma));
        k[i + radius] = v;
        sum += v;
    }
    for (float& v : k) v /= sum;
    return k;
}

/// Separable Gaussian, kernel radius ceil(3*sigma), clamp-to-edge borders.
inline ImageF32 gaussian_blur(const ImageF32& img, float sigma) {
    const std::vector<float> k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    ImageF32 tmp(img.width, img.height, img.channels, img.color_space);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float acc = 0.0f;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * img.at_clamped(x + i, y, c);
                tmp.at(x, y, c) = acc;
            }
    ImageF32 out(img.width, img.height, img.channels, img.color_space);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float acc = 0.0f;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * tmp.at_clamped(x, y + i, c);
                out.at(x, y, c) = acc;
            }
    return out;
}

inline ImageF32 gaussian_blur(const ImageU8& img, float sigma) {
    return gaussian_blur(to_f32(img), sigma);
}

template <typename T>
inline GradientPair gradients(const Raster<T>& img) {
    if (img.channels != 1) throw UnsupportedFormat("gradients: grayscale input required");
    if (img.width < 3 || img.height < 3)
        throw ImageTooSmall("gradients: need at least 3x3");
    GradientPair g{ImageF32(img.width, img.height, 1),
                   ImageF32(img.width, img.height, 1)};
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (x == 0)
                g.ix.at(x, y) = static_cast<float>(img.at(1, y)) - img.at(0, y);
            else if (x == img.width - 1)
                g.ix.at(x, y) = static_cast<float>(img.at(x, y)) - img.at(x - 1, y);
            else
                g.ix.at(x, y) =
                    (static_cast<float>(img.at(x + 1, y)) - img.at(x - 1, y)) / 2.0f;
            if (y == 0)
                g.iy.at(x, y) = static_cast<float>(img.at(x, 1)) - img.at(x, 0);
            else if (y == img.height - 1)
                g.iy.at(x, y) = static_cast<float>(img.at(x, y)) - img.at(x, y - 1);
            else
                g.iy.at(x, y) =
                    (static_cast<float>(img.at(x, y + 1)) - img.at(x, y - 1)) / 2.0f;
        }
    return g;
}

/// Blur (sigma=1) then keep every second pixel starting at (0,0).
inline ImageF32 downsample(const ImageF32& img) {
    if (img.width < 2 || img.height < 2)
        throw ImageTooSmall("downsample: need at least 2x2");
    ImageF32 blurred = gaussian_blur(img, 1.0f);
    ImageF32 out(img.width / 2, img.height / 2, img.channels, img.color_space);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = blurred.at(2 * x, 2 * y, c);
    return out;
}

/// Bilinear resize; target dims must be within +-1 of twice the source.
inline ImageF32 upsample(const ImageF32& img, int target_w, int target_h) {
    if (std::abs(target_w - 2 * img.width) > 1 || std::abs(target_h - 2 * img.height) > 1)
        throw BadTargetDims("upsample: target dims must be ~2x source");
    ImageF32 out(target_w, target_h, img.channels, img.color_space);
    const float sx = target_w > 1 ? static_cast<float>(img.width - 1) / (target_w - 1) : 0.0f;
    const float sy = target_h > 1 ? static_cast<float>(img.height - 1) / (target_h - 1) : 0.0f;
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
            float fx = x * sx, fy = y * sy;
            int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
            float ax = fx - x0, ay = fy - y0;
            for (int c = 0; c < img.channels; ++c) {
                float v00 = img.at_clamped(x0, y0, c);
                float v10 = img.at_clamped(x0 + 1, y0, c);
                float v01 = img.at_clamped(x0, y0 + 1, c);
                float v11 = img.at_clamped(x0 + 1, y0 + 1, c);
                out.at(x, y, c) = (1 - ay) * ((1 - ax) * v00 + ax * v10) +
                                  ay * ((1 - ax) * v01 + ax * v11);
            }
        }
    return out;
}

inline Pyramid gaussian_pyramid(const ImageF32& img, int levels) {
    if (levels < 1) throw TooManyLevels("pyramid: levels must be >= 1");
    Pyramid p;
    p.levels.push_back(img);
    for (int i = 1; i < levels; ++i) {
        const ImageF32& prev = p.levels.back();
        if (prev.width < 2 || prev.height < 2)
            throw TooManyLevels("pyramid: image too small for requested levels");
        p.levels.push_back(downsample(prev));
    }
    return p;
}

}  // namespace lorbpano

#endif
