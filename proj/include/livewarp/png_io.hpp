// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <png.h>

#include "livewarp/image.hpp"

namespace livewarp::png {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw Error("cannot open " + path.string());
    }
    return f;
}

// Keeps libpng quiet; failures surface as exceptions.
inline void on_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
inline void on_warning(png_structp, png_const_charp) {}

// Decodes to `channels` samples per pixel at `bit_depth` bits. Palette and
// gray-alpha inputs are expanded; 16-bit inputs are kept at 16 bits only
// when requested.
inline std::vector<std::uint8_t> read_raw(const std::filesystem::path& path, int& width,
                                          int& height, int channels, int bit_depth) {
    auto file = open(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png: unreadable image " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color_type = png_get_color_type(png, info);
    const int src_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && src_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (bit_depth == 8 && src_depth == 16) png_set_strip_16(png);
    if (bit_depth == 16 && src_depth < 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png: expected 16-bit image " + path.string());
    }
    const bool src_gray = !(color_type & PNG_COLOR_MASK_COLOR);
    if (channels == 3 && src_gray) png_set_gray_to_rgb(png);
    if (channels == 1 && !src_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (bit_depth == 16) png_set_swap(png);  // host little-endian samples
    png_read_update_info(png, info);

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    const std::size_t expected = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    if (row_bytes != expected) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png: unsupported layout in " + path.string());
    }
    pixels.resize(row_bytes * height);
    rows.resize(height);
    for (int y = 0; y < height; ++y) rows[y] = pixels.data() + row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

inline void write_raw(const std::filesystem::path& path, const std::uint8_t* data, int width,
                      int height, int channels, int bit_depth) {
    auto file = open(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png: failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, bit_depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(data + row_bytes * y));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}


struct MemoryReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;
};

inline void read_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (r->size - r->pos < n) png_longjmp(png, 1);
    std::memcpy(out, r->data + r->pos, n);
    r->pos += n;
}

inline void write_memory(png_structp png, png_bytep in, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), in, in + n);
}

inline void flush_memory(png_structp) {}

}  // namespace detail

inline ColorImage read_rgb8(const std::filesystem::path& path) {
    int w = 0, h = 0;
    auto raw = detail::read_raw(path, w, h, 3, 8);
    ColorImage img(w, h, 3);
    std::copy(raw.begin(), raw.end(), img.data().begin());
    return img;
}

/// 16-bit grayscale samples, unscaled.
inline Image<std::uint16_t> read_gray16(const std::filesystem::path& path) {
    int w = 0, h = 0;
    auto raw = detail::read_raw(path, w, h, 1, 16);
    Image<std::uint16_t> img(w, h, 1);
    std::memcpy(img.data().data(), raw.data(), raw.size());
    return img;
}

inline void write_rgb8(const std::filesystem::path& path, const ColorImage& img) {
    if (img.channels() != 3) throw Error("png: expected 3 channels");
    detail::write_raw(path, img.data().data(), img.width(), img.height(), 3, 8);
}

inline void write_gray8(const std::filesystem::path& path, const Image<std::uint8_t>& img) {
    if (img.channels() != 1) throw Error("png: expected 1 channel");
    detail::write_raw(path, img.data().data(), img.width(), img.height(), 1, 8);
}

inline void write_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
    detail::write_raw(path, reinterpret_cast<const std::uint8_t*>(img.data().data()),
                      img.width(), img.height(), 1, 16);
}

/// RGB8 image as an in-memory PNG stream.
inline std::vector<std::uint8_t> encode_rgb8(const ColorImage& img) {
    if (img.channels() != 3) throw Error("png: expected 3 channels");
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error,
                                              detail::on_warning);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png: encode failed");
    }
    png_set_write_fn(png, &out, detail::write_memory, detail::flush_memory);
    png_set_compression_level(png, 1);
    png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t row_bytes = std::size_t(img.width()) * 3;
    for (int y = 0; y < img.height(); ++y) {
        png_write_row(png, const_cast<png_bytep>(img.data().data() + row_bytes * y));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

/// Decodes an 8-bit RGB PNG stream; other layouts are rejected.
inline ColorImage decode_rgb8(std::span<const std::uint8_t> bytes) {
    detail::MemoryReader reader{bytes.data(), bytes.size()};
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error,
                                             detail::on_warning);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    ColorImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png: malformed stream");
    }
    png_set_read_fn(png, &reader, detail::read_memory);
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8 ||
        png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png: expected 8-bit RGB");
    }
    img = ColorImage(int(png_get_image_width(png, info)), int(png_get_image_height(png, info)), 3);
    rows.resize(std::size_t(img.height()));
    for (int y = 0; y < img.height(); ++y) rows[std::size_t(y)] = img.pixel(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace livewarp::png
