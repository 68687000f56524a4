// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "livewarp/geometry.hpp"

namespace livewarp {

/// Dense interleaved image, row-major.
template <typename T>
class Image {
public:
    using value_type = T;

    Image() = default;
    Image(int width, int height, int channels, T fill = T{})
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width < 0 || height < 0 || channels <= 0) {
            throw Error("image: invalid dimensions");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    std::size_t index(int x, int y) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_;
    }

    T& at(int x, int y, int c = 0) { return data_[index(x, y) + c]; }
    const T& at(int x, int y, int c = 0) const { return data_[index(x, y) + c]; }

    T* pixel(int x, int y) { return data_.data() + index(x, y); }
    const T* pixel(int x, int y) const { return data_.data() + index(x, y); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }

    bool same_shape(const Image& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<T> data_;
};

using ColorImage = Image<std::uint8_t>;  // RGB8
using DepthImage = Image<float>;         // meters, 0 = invalid
using FloatImage = Image<float>;

inline float luminance(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

/// RGB8 to [0,1] floats.
inline FloatImage to_float(const ColorImage& img) {
    FloatImage out(img.width(), img.height(), img.channels());
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<float>(src[i]) / 255.0f;
    }
    return out;
}

inline std::uint8_t to_u8(float v) {
    if (!(v > 0.0f)) return 0;
    if (v >= 1.0f) return 255;
    return static_cast<std::uint8_t>(v * 255.0f + 0.5f);
}

}  // namespace livewarp
