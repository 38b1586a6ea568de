#pragma once

// Thin libpng wrappers for the three interchange rasters: 8-bit RGB images
// in, 8-bit grayscale heatmaps out, 8-bit single-channel class-id rasters
// in/out.

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "upd/raster.hpp"

namespace upd::pngio {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct Gray8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;
};

inline Gray8 read_rows(const std::string& path, bool want_rgb) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (want_rgb) {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        png_set_strip_alpha(png);
    } else {
        if (color & PNG_COLOR_MASK_COLOR) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw std::runtime_error("expected single-channel grayscale PNG: " + path);
        }
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int ch = want_rgb ? 3 : 1;
    if (static_cast<int>(png_get_rowbytes(png, info)) != w * ch) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unexpected PNG row layout: " + path);
    }

    Gray8 out;
    out.height = h;
    out.width = w;
    out.data.resize(static_cast<std::size_t>(h) * w * ch);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = out.data.data() + static_cast<std::size_t>(y) * w * ch;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_rows(const std::string& path, int h, int w, int ch,
                       const std::vector<std::uint8_t>& bytes) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot create PNG file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8,
                 ch == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * w * ch);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace detail

// 8-bit RGB PNG -> [0,1] raster via v/255.
inline ImageRaster read_image(const std::string& path) {
    detail::Gray8 raw = detail::read_rows(path, /*want_rgb=*/true);
    std::vector<double> d(raw.data.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = raw.data[i] / 255.0;
    return ImageRaster(raw.height, raw.width, 3, std::move(d));
}

inline void write_image(const std::string& path, const ImageRaster& img) {
    require(img.channels == 3, "write_image: expected 3 channels");
    std::vector<std::uint8_t> bytes(img.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(std::lround(img.data[i] * 255.0));
    detail::write_rows(path, img.height, img.width, 3, bytes);
}

// Activation map -> 8-bit grayscale PNG via round(v*255).
inline void write_heatmap(const std::string& path, const ActivationMap& map) {
    std::vector<std::uint8_t> bytes(map.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(std::lround(map.data[i] * 255.0));
    detail::write_rows(path, map.height, map.width, 1, bytes);
}

// Raw single-channel 8-bit reads/writes (class-id rasters).
inline detail::Gray8 read_gray8(const std::string& path) {
    return detail::read_rows(path, /*want_rgb=*/false);
}

inline void write_gray8(const std::string& path, int h, int w,
                        const std::vector<std::uint8_t>& bytes) {
    require(bytes.size() == static_cast<std::size_t>(h) * w, "write_gray8: bad byte count");
    detail::write_rows(path, h, w, 1, bytes);
}

}  // namespace upd::pngio
