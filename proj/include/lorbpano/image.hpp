#ifndef LORBPANO_IMAGE_HPP
#define LORBPANO_IMAGE_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "lorbpano/error.hpp"

namespace lorbpano {

enum class ColorSpace { Gray, RGB };

/// Owned row-major raster. T is uint8_t for storage, float for arithmetic.
template <typename T>
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    ColorSpace color_space = ColorSpace::Gray;
    std::vector<T> data;

    Raster() = default;
    Raster(int w, int h, int ch, ColorSpace cs = ColorSpace::Gray, T fill = T{})
        : width(w), height(h), channels(ch), color_space(cs),
          data(static_cast<std::size_t>(w) * h * ch, fill) {
        assert(w >= 1 && h >= 1 && (ch == 1 || ch == 3));
    }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }

    T& at(int x, int y, int c = 0) {
        assert(in_bounds(x, y) && c >= 0 && c < channels);
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const T& at(int x, int y, int c = 0) const {
        assert(in_bounds(x, y) && c >= 0 && c < channels);
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    /// Clamp-to-edge access; the single border policy used throughout.
    const T& at_clamped(int x, int y, int c = 0) const {
        x = x < 0 ? 0 : (x >= width ? width - 1 : x);
        y = y < 0 ? 0 : (y >= height ? height - 1 : y);
        return at(x, y, c);
    }

    bool same_shape(const Raster& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

using ImageU8 = Raster<std::uint8_t>;
using ImageF32 = Raster<float>;

/// round-half-away-from-zero, the one float->u8 conversion rule.
inline std::uint8_t to_u8(float v) {
    float r = std::round(v);  // std::round is half-away-from-zero
    if (r < 0.0f) r = 0.0f;
    if (r > 255.0f) r = 255.0f;
    return static_cast<std::uint8_t>(r);
}

inline ImageF32 to_f32(const ImageU8& img) {
    ImageF32 out(img.width, img.height, img.channels, img.color_space);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(img.data[i]);
    return out;
}

inline ImageU8 to_u8_image(const ImageF32& img) {
    ImageU8 out(img.width, img.height, img.channels, img.color_space);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = to_u8(img.data[i]);
    return out;
}

namespace detail {

inline int pnm_read_token(std::istream& in) {
    // skips whitespace and '#' comments
    while (in) {
        int c = in.peek();
        if (c == '#') {
            while (in && in.get() != '\n') {
            }
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    in >> v;
    return v;
}

inline ImageU8 load_pnm(std::istream& in, const std::string& path) {
    char p = 0, n = 0;
    in.get(p);
    in.get(n);
    if (p != 'P' || (n != '5' && n != '6'))
        throw UnsupportedFormat(path + ": not a binary PGM/PPM");
    const int channels = (n == '5') ? 1 : 3;
    int w = pnm_read_token(in);
    int h = pnm_read_token(in);
    int maxval = pnm_read_token(in);
    if (!in || w < 1 || h < 1) throw CorruptData(path + ": bad header");
    if (maxval != 255) throw UnsupportedFormat(path + ": only maxval 255 supported");
    in.get();  // single whitespace after maxval
    ImageU8 img(w, h, channels, channels == 1 ? ColorSpace::Gray : ColorSpace::RGB);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.data.size())
        throw CorruptData(path + ": truncated pixel data");
    return img;
}

inline ImageU8 load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw FileNotFound(path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw NumericalFailure(path + ": libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw CorruptData(path + ": libpng decode error");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int ctype = png_get_color_type(png, info);
    if (depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw UnsupportedFormat(path + ": only 8-bit PNG supported");
    }
    if (ctype == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (ctype == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw UnsupportedFormat(path + ": unsupported PNG channel count");
    }
    ImageU8 img(static_cast<int>(w), static_cast<int>(h), channels,
                channels == 1 ? ColorSpace::Gray : ColorSpace::RGB);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.data.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

}  // namespace detail

inline ImageU8 load_image(const std::string& path) {
    if (!std::filesystem::exists(path)) throw FileNotFound(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound(path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.seekg(0);
    if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'))
        return detail::load_pnm(in, path);
    if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
        in.close();
        return detail::load_png(path);
    }
    throw UnsupportedFormat(path + ": expected binary PGM/PPM or PNG");
}

inline void save_pnm(const ImageU8& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw UnsupportedFormat(path + ": only 1- or 3-channel images");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileNotFound(path + ": cannot open for writing");
    out << (img.channels == 1 ? "P5\n" : "P6\n")
        << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw CorruptData(path + ": write failed");
}

}  // namespace lorbpano

#endif
