// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include "livewarp/fusion.hpp"

namespace livewarp {

enum class ViewMode : std::uint8_t { Color = 0, Depth = 1, Confidence = 2 };

inline const char* to_string(ViewMode m) {
    switch (m) {
        case ViewMode::Color: return "color";
        case ViewMode::Depth: return "depth";
        case ViewMode::Confidence: return "confidence";
    }
    return "?";
}

inline std::optional<ViewMode> parse_view_mode(std::string_view s) {
    if (s == "color") return ViewMode::Color;
    if (s == "depth") return ViewMode::Depth;
    if (s == "confidence") return ViewMode::Confidence;
    return std::nullopt;
}

/// Image-level feedback: rgb = (1 - blend) * current + blend * previous.
class TemporalState {
public:
    explicit TemporalState(float blend = 0.1f) { set_blend(blend); }

    float blend() const { return blend_; }
    void set_blend(float b) {
        if (!(b >= 0.0f && b <= 1.0f)) throw Error("temporal blend must be in [0, 1]");
        blend_ = b;
    }

    bool has_previous() const { return previous_.pixel_count() > 0; }
    const FloatImage& previous() const { return previous_; }
    void reset() {
        previous_ = FloatImage();
        previous_valid_.clear();
    }

private:
    friend struct Composer;
    float blend_ = 0.1f;
    FloatImage previous_;                     // RGB in [0,1]
    std::vector<std::uint8_t> previous_valid_;  // per pixel; 0 where the previous frame had a hole
};

struct ComposedFrame {
    ColorImage rgb;
    ColorImage depth_vis;  // single channel
    ColorImage conf_vis;
    std::uint64_t frame_index = 0;

    int width() const { return rgb.width(); }
    int height() const { return rgb.height(); }
};

struct ComposeConfig {
    float depth_near = 0.1f;
    float depth_far = 10.0f;
    float conf_k = 0.05f;
};

/// Linear near -> white, far -> dark gray; holes black.
inline ColorImage visualize_depth(const FusionBuffer& buf, float near, float far) {
    if (!(far > near)) throw Error("visualize_depth: far must exceed near");
    ColorImage out(buf.width(), buf.height(), 1);
    auto px = out.data();
    for (std::size_t i = 0; i < buf.size(); ++i) {
        if (buf.hole(i)) continue;
        const float t = std::clamp((buf.depth()[i] - near) / (far - near), 0.0f, 1.0f);
        px[i] = static_cast<std::uint8_t>(255 - std::lround(t * 239.0f));
    }
    return out;
}

inline ColorImage visualize_confidence(const FusionBuffer& buf, float k) {
    return confidence_map(buf, k).overlay;
}

/// Reference composer standing in for a learned decoder: the fused colour
/// channels are already a weighted mean and are used as-is.
struct Composer {
    static FloatImage raw_rgb(const FusionBuffer& buf) {
        if (!buf.has_features()) throw Error("compose: buffer has no features");
        FloatImage out(buf.width(), buf.height(), 3);
        auto dst = out.data();
        for (std::size_t i = 0; i < buf.size(); ++i) {
            if (buf.hole(i)) continue;
            const float* f = buf.feature(i);
            dst[3 * i + 0] = f[0];
            dst[3 * i + 1] = f[1];
            dst[3 * i + 2] = f[2];
        }
        return out;
    }

    /// Blends into the state and returns the blended image in [0,1]. Holes stay
    /// black and pixels that were holes last frame are not blended.
    static FloatImage blend(const FusionBuffer& buf, TemporalState& state) {
        FloatImage cur = raw_rgb(buf);
        const float b = state.blend_;
        if (state.has_previous() && state.previous_.same_shape(cur) && b > 0.0f) {
            auto c = cur.data();
            auto p = state.previous_.data();
            for (std::size_t i = 0; i < buf.size(); ++i) {
                if (buf.hole(i) || !state.previous_valid_[i]) continue;
                for (std::size_t j = 3 * i; j < 3 * i + 3; ++j) c[j] = (1.0f - b) * c[j] + b * p[j];
            }
        }
        state.previous_ = cur;
        state.previous_valid_.resize(buf.size());
        for (std::size_t i = 0; i < buf.size(); ++i) state.previous_valid_[i] = buf.hole(i) ? 0 : 1;
        return cur;
    }
};

inline ComposedFrame compose(const FusionBuffer& buf, TemporalState& state,
                             const ComposeConfig& cfg = {}, std::uint64_t frame_index = 0) {
    ComposedFrame out;
    out.frame_index = frame_index;
    const FloatImage rgb = Composer::blend(buf, state);
    out.rgb = ColorImage(buf.width(), buf.height(), 3);
    auto src = rgb.data();
    auto dst = out.rgb.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = to_u8(src[i]);
    out.depth_vis = visualize_depth(buf, cfg.depth_near, cfg.depth_far);
    out.conf_vis = visualize_confidence(buf, cfg.conf_k);
    return out;
}

/// The RGB8 image shown for a view mode; depth is expanded to gray RGB.
inline ColorImage frame_for_mode(const ComposedFrame& f, ViewMode mode) {
    switch (mode) {
        case ViewMode::Color: return f.rgb;
        case ViewMode::Confidence: return f.conf_vis;
        case ViewMode::Depth: {
            ColorImage out(f.depth_vis.width(), f.depth_vis.height(), 3);
            auto s = f.depth_vis.data();
            auto d = out.data();
            for (std::size_t i = 0; i < s.size(); ++i) d[3 * i] = d[3 * i + 1] = d[3 * i + 2] = s[i];
            return out;
        }
    }
    return f.rgb;
}

}  // namespace livewarp
