// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "livewarp/image.hpp"
#include "livewarp/weighting.hpp"

namespace livewarp {

inline constexpr int kFeatureChannels = 8;
using Feature = std::array<float, kFeatureChannels>;
using KeyframeId = std::int64_t;

/// One rasterized sample landing on a target pixel.
struct Fragment {
    int x = 0;
    int y = 0;
    float depth = 0.0f;   // linear depth in the target camera
    Feature feature{};
    float weight = 0.0f;  // w_f
    KeyframeId source = 0;
};

struct FusionPixel {
    float d = std::numeric_limits<float>::infinity();
    float w = 0.0f;
    Feature f{};
    std::uint32_t n = 0;

    bool hole() const { return n == 0; }
};

enum class FuseCase { Replace, Discard, Fuse };

/// Which branch a fragment at depth `d_f` takes against a pixel at `d`.
/// Band boundaries belong to Fuse.
inline FuseCase classify(float d, std::uint32_t n, float d_f, float band) {
    if (n == 0) return FuseCase::Replace;
    if (d_f < d - band) return FuseCase::Replace;
    if (d_f > d + band) return FuseCase::Discard;
    return FuseCase::Fuse;
}

namespace detail {

// Shared by every fusion path so depth arithmetic is identical whether or not
// features ride along. `features(float* out)` is called only when needed.
template <int C, typename FeatureFn>
inline FuseCase fuse_into(float& d, float& w, std::uint32_t& n, float* f, float d_f, float w_f,
                          FeatureFn&& features, const DepthErrorModel& model) {
    const FuseCase c = classify(d, n, d_f, n ? model.band_f(d) : 0.0f);
    if (c == FuseCase::Replace) {
        d = d_f;
        w = w_f;
        n = 1;
        if constexpr (C > 0) features(f);
        return c;
    }
    if (c == FuseCase::Discard) return c;
    const float total = w + w_f;
    if (!(total > 0.0f)) return FuseCase::Discard;
    const float alpha = w / total;
    const float beta = 1.0f - alpha;
    w = total;
    d = alpha * d + beta * d_f;
    ++n;
    if constexpr (C > 0) {
        float tmp[C];
        features(tmp);
        for (int i = 0; i < C; ++i) f[i] = alpha * f[i] + beta * tmp[i];
    }
    return c;
}

}  // namespace detail

/// Case-based incremental fusion of a single fragment.
inline FusionPixel fuse_fragment(FusionPixel px, const Fragment& frag, const DepthErrorModel& model) {
    if (!(frag.depth > 0.0f)) throw Error("fuse_fragment: fragment depth must be positive");
    detail::fuse_into<kFeatureChannels>(
        px.d, px.w, px.n, px.f.data(), frag.depth, frag.weight,
        [&](float* out) { std::copy(frag.feature.begin(), frag.feature.end(), out); }, model);
    return px;
}

/// Screen-space fusion state, stored as planes. A depth-only buffer carries
/// no feature plane.
class FusionBuffer {
public:
    FusionBuffer() = default;
    FusionBuffer(int width, int height, bool with_features = true)
        : width_(width), height_(height), with_features_(with_features) {
        reset();
    }

    void reset() {
        const std::size_t n = static_cast<std::size_t>(width_) * height_;
        depth_.assign(n, std::numeric_limits<float>::infinity());
        weight_.assign(n, 0.0f);
        count_.assign(n, 0);
        features_.assign(with_features_ ? n * kFeatureChannels : 0, 0.0f);
    }

    /// Reuses storage when the shape is unchanged.
    void resize(int width, int height, bool with_features) {
        width_ = width;
        height_ = height;
        with_features_ = with_features;
        reset();
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool has_features() const { return with_features_; }
    std::size_t size() const { return depth_.size(); }

    float* depth() { return depth_.data(); }
    float* weight() { return weight_.data(); }
    std::uint32_t* count() { return count_.data(); }
    float* features() { return features_.data(); }
    const std::vector<float>& depth() const { return depth_; }
    const std::vector<float>& weight() const { return weight_; }
    const std::vector<std::uint32_t>& count() const { return count_; }
    const std::vector<float>& features() const { return features_; }

    const float* feature(std::size_t i) const { return features_.data() + i * kFeatureChannels; }
    bool hole(std::size_t i) const { return count_[i] == 0; }

    FusionPixel pixel(int x, int y) const {
        const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
        FusionPixel p;
        p.d = depth_[i];
        p.w = weight_[i];
        p.n = count_[i];
        if (with_features_) std::copy_n(feature(i), kFeatureChannels, p.f.begin());
        return p;
    }

    void set_pixel(int x, int y, const FusionPixel& p) {
        const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
        depth_[i] = p.d;
        weight_[i] = p.w;
        count_[i] = p.n;
        if (with_features_) std::copy(p.f.begin(), p.f.end(), features_.data() + i * kFeatureChannels);
    }

    std::size_t hole_count() const {
        std::size_t h = 0;
        for (auto c : count_) h += c == 0;
        return h;
    }

    bool operator==(const FusionBuffer&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    bool with_features_ = true;
    std::vector<float> depth_;
    std::vector<float> weight_;
    std::vector<std::uint32_t> count_;
    std::vector<float> features_;
};

struct ConfidenceMap {
    FloatImage conf;     // [0,1], 0 for holes
    ColorImage overlay;  // green (good), white (w = k), red (bad)
};

/// Tone curve for the mean fused weight.
inline float confidence_from_mean_weight(float mean_w, float k) {
    return mean_w > 0.0f ? mean_w / (mean_w + k) : 0.0f;
}

/// Red at 0, white at 0.5, green at 1.
inline std::array<std::uint8_t, 3> confidence_color(float conf) {
    conf = std::clamp(conf, 0.0f, 1.0f);
    if (conf <= 0.5f) {
        const std::uint8_t gb = to_u8(2.0f * conf);
        return {255, gb, gb};
    }
    const std::uint8_t rb = to_u8(2.0f * (1.0f - conf));
    return {rb, 255, rb};
}

/// Per-pixel mean fragment weight w/n, tone-mapped by w/(w+k).
inline ConfidenceMap confidence_map(const FusionBuffer& buf, float k) {
    if (!(k > 0.0f)) throw Error("confidence_map: k must be positive");
    ConfidenceMap out{FloatImage(buf.width(), buf.height(), 1),
                      ColorImage(buf.width(), buf.height(), 3)};
    const auto& w = buf.weight();
    const auto& n = buf.count();
    auto conf = out.conf.data();
    auto rgb = out.overlay.data();
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const float mean = n[i] ? w[i] / float(n[i]) : 0.0f;
        conf[i] = confidence_from_mean_weight(mean, k);
        const auto c = confidence_color(conf[i]);
        rgb[3 * i + 0] = c[0];
        rgb[3 * i + 1] = c[1];
        rgb[3 * i + 2] = c[2];
    }
    return out;
}

}  // namespace livewarp
