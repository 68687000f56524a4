// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "livewarp/fusion.hpp"
#include "livewarp/keyframe_store.hpp"
#include "livewarp/lru_cache.hpp"

namespace livewarp {

/// Per-pixel 8-vector features at keyframe resolution. Channels 0-3 are the
/// source R, G, B in [0,1] and linear depth in meters; 4-7 come from the
/// encoder.
struct FeatureMap {
    KeyframeId keyframe_id = 0;
    FloatImage channels;    // kFeatureChannels interleaved
    FloatImage confidence;  // [0,1]

    int width() const { return channels.width(); }
    int height() const { return channels.height(); }
    const float* at(int x, int y) const { return channels.pixel(x, y); }
};

/// Pluggable encoder stage.
class FeatureEncoder {
public:
    virtual ~FeatureEncoder() = default;
    virtual FeatureMap encode(const Keyframe& kf) const = 0;
    virtual std::string name() const = 0;
};

/// Deterministic stand-in for a learned encoder. On luminance L:
///   4: horizontal Sobel, scaled so a unit step reads 1.0
///   5: vertical Sobel, same scale
///   6: 4-neighbour Laplacian
///   7: 5x5 standard deviation
/// Borders replicate the edge pixel. Confidence is 1 where depth is valid.
class ReferenceEncoder final : public FeatureEncoder {
public:
    FeatureMap encode(const Keyframe& kf) const override { return encode_frame(kf.id, *kf.frame); }

    std::string name() const override { return "reference"; }

    static FeatureMap encode_frame(KeyframeId id, const InputFrame& frame) {
        const int w = frame.color.width();
        const int h = frame.color.height();
        FeatureMap fm;
        fm.keyframe_id = id;
        fm.channels = FloatImage(w, h, kFeatureChannels);
        fm.confidence = FloatImage(w, h, 1);

        FloatImage lum(w, h, 1);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::uint8_t* c = frame.color.pixel(x, y);
                const float r = c[0] / 255.0f, g = c[1] / 255.0f, b = c[2] / 255.0f;
                float* f = fm.channels.pixel(x, y);
                f[0] = r;
                f[1] = g;
                f[2] = b;
                f[3] = frame.depth.at(x, y);
                lum.at(x, y) = luminance(r, g, b);
                fm.confidence.at(x, y) = frame.depth.at(x, y) > 0.0f ? 1.0f : 0.0f;
            }
        }

        auto L = [&](int x, int y) {
            return lum.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
        };
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                float* f = fm.channels.pixel(x, y);
                const float gx = (L(x + 1, y - 1) - L(x - 1, y - 1)) +
                                 2.0f * (L(x + 1, y) - L(x - 1, y)) +
                                 (L(x + 1, y + 1) - L(x - 1, y + 1));
                const float gy = (L(x - 1, y + 1) - L(x - 1, y - 1)) +
                                 2.0f * (L(x, y + 1) - L(x, y - 1)) +
                                 (L(x + 1, y + 1) - L(x + 1, y - 1));
                f[4] = 0.25f * gx;
                f[5] = 0.25f * gy;
                f[6] = L(x + 1, y) + L(x - 1, y) + L(x, y + 1) + L(x, y - 1) - 4.0f * L(x, y);
                double s = 0.0, s2 = 0.0;
                for (int dy = -2; dy <= 2; ++dy) {
                    for (int dx = -2; dx <= 2; ++dx) {
                        const double v = L(x + dx, y + dy);
                        s += v;
                        s2 += v * v;
                    }
                }
                const double mean = s / 25.0;
                f[7] = static_cast<float>(std::sqrt(std::max(0.0, s2 / 25.0 - mean * mean)));
            }
        }
        return fm;
    }
};

/// Encodes allowed per rendered frame. Negative max means unlimited.
struct EncoderBudget {
    int max_encodes_per_frame = 2;
    int encodes_used = 0;

    static EncoderBudget unlimited() { return {-1, 0}; }
    bool exhausted() const { return max_encodes_per_frame >= 0 && encodes_used >= max_encodes_per_frame; }
};

enum class CacheStatus { Hit, Encoded, Deferred };

struct CacheLookup {
    std::shared_ptr<const FeatureMap> map;  // null when deferred
    CacheStatus status = CacheStatus::Deferred;
    bool deferred() const { return status == CacheStatus::Deferred; }
};

struct CacheStats {
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t encodes = 0;
    std::size_t deferred = 0;
    std::size_t evictions = 0;

    double hit_rate() const {
        const std::size_t total = hits + misses;
        return total ? double(hits) / double(total) : 0.0;
    }
};

/// LRU cache of encoded keyframes, keyed by keyframe id only.
class FeatureCache {
public:
    FeatureCache(std::size_t capacity, std::shared_ptr<const FeatureEncoder> encoder)
        : cache_(capacity), encoder_(std::move(encoder)) {
        if (capacity == 0) throw Error("feature cache: capacity must be positive");
    }

    CacheLookup get_or_encode(const Keyframe& kf, EncoderBudget& budget) {
        if (auto* hit = cache_.find(kf.id)) {
            ++stats_.hits;
            return {*hit, CacheStatus::Hit};
        }
        ++stats_.misses;
        if (budget.exhausted()) {
            ++stats_.deferred;
            return {nullptr, CacheStatus::Deferred};
        }
        auto map = std::make_shared<const FeatureMap>(encoder_->encode(kf));
        ++budget.encodes_used;
        ++stats_.encodes;
        if (cache_.insert(kf.id, map)) ++stats_.evictions;
        return {std::move(map), CacheStatus::Encoded};
    }

    CacheLookup get_or_encode(KeyframeId id, const Snapshot& snapshot, EncoderBudget& budget) {
        const Keyframe* kf = snapshot.find(id);
        if (!kf) throw Error("feature cache: unknown keyframe id " + std::to_string(id));
        return get_or_encode(*kf, budget);
    }

    bool contains(KeyframeId id) const { return cache_.contains(id); }
    std::size_t size() const { return cache_.size(); }
    std::size_t capacity() const { return cache_.capacity(); }
    std::vector<KeyframeId> keys() const { return cache_.keys(); }
    const CacheStats& stats() const { return stats_; }
    void reset_stats() { stats_ = {}; }
    void clear() { cache_.clear(); }
    const FeatureEncoder& encoder() const { return *encoder_; }

private:
    LruCache<KeyframeId, std::shared_ptr<const FeatureMap>> cache_;
    std::shared_ptr<const FeatureEncoder> encoder_;
    CacheStats stats_;
};

}  // namespace livewarp
