// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "livewarp/compose.hpp"
#include "livewarp/encoder.hpp"
#include "livewarp/view_select.hpp"
#include "livewarp/warp_fusion.hpp"

namespace livewarp {

enum class WarpMode { Forward, Deferred };

inline const char* to_string(WarpMode m) { return m == WarpMode::Forward ? "forward" : "deferred"; }

struct EngineConfig {
    ViewSelectConfig select;
    std::size_t cache_capacity = 64;
    int encode_budget = 2;  // negative: unlimited
    float edge_lambda = 3.0f;
    DepthErrorModel model;
    ComposeConfig compose;
    float temporal_blend = 0.1f;
    WarpMode mode = WarpMode::Forward;
    int deferred_depth_views = 0;  // depth sources in deferred mode; 0 = num_views
    bool view_selection = true;    // false: every keyframe is a source
    unsigned threads = 1;

    void validate() const {
        model.validate();
        if (select.num_views < 1) throw Error("config: num_views must be at least 1");
        if (select.tile_size < 1) throw Error("config: tile_size must be positive");
        if (select.coverage_downsample < 1) throw Error("config: coverage_downsample must be positive");
        if (cache_capacity < 1) throw Error("config: cache_capacity must be positive");
        if (!(edge_lambda > 0.0f)) throw Error("config: edge_lambda must be positive");
        if (!(temporal_blend >= 0.0f && temporal_blend <= 1.0f)) {
            throw Error("config: temporal_blend must be in [0, 1]");
        }
        if (!(compose.depth_far > compose.depth_near)) throw Error("config: depth_far must exceed depth_near");
        if (!(compose.conf_k > 0.0f)) throw Error("config: conf_k must be positive");
        if (deferred_depth_views < 0) throw Error("config: deferred_depth_views must be >= 0");
    }
};

/// Wall-clock per stage, milliseconds.
struct FrameTimings {
    double select_ms = 0.0;
    double encode_ms = 0.0;
    double geometry_ms = 0.0;  // one-off mesh preparation for new keyframes
    double project_ms = 0.0;
    double raster_ms = 0.0;    // includes in-place fusion
    double sample_ms = 0.0;    // deferred stage 2
    double compose_ms = 0.0;
    double total_ms = 0.0;
};

struct RenderResult {
    ComposedFrame frame;
    ViewSelection selection;
    std::vector<KeyframeId> feature_sources;  // ascending id
    std::vector<KeyframeId> depth_sources;    // ascending id
    std::size_t cache_hits = 0;
    std::size_t encodes = 0;
    std::size_t deferred = 0;
    std::size_t holes = 0;
    FrameTimings timings;
};

/// Single-owner render pipeline over a keyframe store. Not thread-safe; the
/// store may be written concurrently.
class RenderEngine {
public:
    explicit RenderEngine(const KeyframeStore& store, EngineConfig config = {},
                          std::shared_ptr<const FeatureEncoder> encoder =
                              std::make_shared<ReferenceEncoder>())
        : store_(&store), config_(std::move(config)),
          pool_(std::make_unique<WorkerPool>(config_.threads)),
          cache_(config_.cache_capacity, std::move(encoder)), temporal_(config_.temporal_blend),
          warper_(pool_.get()) {
        config_.validate();
    }

    const EngineConfig& config() const { return config_; }
    FeatureCache& cache() { return cache_; }
    const FusionBuffer& buffer() const { return buffer_; }
    const FusionBuffer& depth_buffer() const { return depth_buffer_; }
    TemporalState& temporal() { return temporal_; }
    std::uint64_t frames_rendered() const { return frame_index_; }

    /// Changes that keep caches valid apply immediately; a new error model
    /// or edge threshold drops the cached meshes.
    void reconfigure(const EngineConfig& next) {
        next.validate();
        if (next.cache_capacity != config_.cache_capacity) {
            throw Error("config: cache_capacity cannot change at runtime");
        }
        if (next.threads != config_.threads) throw Error("config: threads cannot change at runtime");
        const bool geometry_stale = !(next.model.a == config_.model.a && next.model.b == config_.model.b &&
                                      next.model.c == config_.model.c &&
                                      next.model.band_kappa == config_.model.band_kappa &&
                                      next.model.strict_paper_mode == config_.model.strict_paper_mode &&
                                      next.edge_lambda == config_.edge_lambda);
        config_ = next;
        temporal_.set_blend(config_.temporal_blend);
        if (geometry_stale) geometry_.clear();
    }

    void reset_temporal() { temporal_.reset(); }

    /// Renders one frame. `fixed` bypasses view selection with the given ids
    /// (used in that order for encoding priority).
    RenderResult render(const Pose& pose, const Intrinsics& k,
                        const std::vector<KeyframeId>* fixed = nullptr) {
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        RenderResult r;
        const Snapshot snap = store_->snapshot();
        const WarpTarget target{pose, k};

        // Selection.
        auto t = clock::now();
        std::vector<KeyframeId> ranked;
        if (fixed) {
            ranked = *fixed;
            for (KeyframeId id : ranked) {
                if (!snap.find(id)) throw Error("render: unknown keyframe id " + std::to_string(id));
            }
        } else if (!config_.view_selection) {
            for (const auto& kf : snap) ranked.push_back(kf.id);
        } else {
            ViewSelectConfig sc = config_.select;
            sc.num_views = std::max(sc.num_views, depth_view_count());
            r.selection = select_views(pose, k, snap, config_.model, sc, pool_.get());
            ranked = r.selection.ids;
        }
        r.timings.select_ms = ms_since(t);

        // Features, in ranked order so the budget goes to the best views.
        t = clock::now();
        EncoderBudget budget{config_.encode_budget, 0};
        const std::size_t feature_limit =
            config_.view_selection || fixed ? std::size_t(config_.select.num_views) : ranked.size();
        features_.clear();
        std::size_t considered = 0;
        for (KeyframeId id : ranked) {
            if (considered == feature_limit) break;
            ++considered;
            const CacheLookup lk = cache_.get_or_encode(id, snap, budget);
            switch (lk.status) {
                case CacheStatus::Hit: ++r.cache_hits; break;
                case CacheStatus::Encoded: ++r.encodes; break;
                case CacheStatus::Deferred: ++r.deferred; break;
            }
            if (lk.map) features_.emplace(id, lk.map);
        }
        r.timings.encode_ms = ms_since(t);

        // Geometry for every source that will be rasterized.
        t = clock::now();
        std::vector<KeyframeId> depth_ids;
        if (config_.mode == WarpMode::Deferred) {
            const std::size_t m = fixed || !config_.view_selection ? ranked.size()
                                                                  : std::size_t(depth_view_count());
            depth_ids.assign(ranked.begin(), ranked.begin() + std::min(m, ranked.size()));
        }
        std::vector<KeyframeId> feature_ids;
        for (const auto& [id, map] : features_) feature_ids.push_back(id);
        std::sort(feature_ids.begin(), feature_ids.end());
        std::sort(depth_ids.begin(), depth_ids.end());

        auto make_source = [&](KeyframeId id, bool with_features) {
            const Keyframe* kf = snap.find(id);
            WarpSource s;
            s.id = id;
            s.frame = kf->frame.get();
            s.pose = kf->pose;
            s.geometry = geometry_for(*kf);
            s.features = with_features ? features_.at(id).get() : nullptr;
            return s;
        };
        feature_sources_.clear();
        depth_sources_.clear();
        for (KeyframeId id : feature_ids) feature_sources_.push_back(make_source(id, true));
        for (KeyframeId id : depth_ids) depth_sources_.push_back(make_source(id, false));
        r.timings.geometry_ms = ms_since(t);

        // Warp and fuse.
        WarpTimings wt;
        if (config_.mode == WarpMode::Forward) {
            warper_.fuse_forward(target, feature_sources_, config_.model, buffer_, &wt);
        } else {
            warper_.fuse_deferred(target, depth_sources_, feature_sources_, config_.model, buffer_,
                                  &depth_buffer_, &wt);
        }
        r.timings.project_ms = wt.project_ms;
        r.timings.raster_ms = wt.raster_ms;
        r.timings.sample_ms = wt.sample_ms;

        t = clock::now();
        r.frame = compose(buffer_, temporal_, config_.compose, frame_index_++);
        r.timings.compose_ms = ms_since(t);

        r.feature_sources = std::move(feature_ids);
        r.depth_sources = std::move(depth_ids);
        r.holes = buffer_.hole_count();
        r.timings.total_ms = ms_since(t0);
        return r;
    }

    /// Drops cached meshes of keyframes that left the store.
    void prune(const Snapshot& snap) {
        for (auto it = geometry_.begin(); it != geometry_.end();) {
            it = snap.find(it->first) ? std::next(it) : geometry_.erase(it);
        }
    }

private:
    static double ms_since(std::chrono::steady_clock::time_point t) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count();
    }

    int depth_view_count() const {
        if (config_.mode != WarpMode::Deferred) return config_.select.num_views;
        return config_.deferred_depth_views > 0 ? config_.deferred_depth_views : config_.select.num_views;
    }

    // Meshes depend only on the keyframe's own depth, so pose updates keep them.
    const SourceGeometry* geometry_for(const Keyframe& kf) {
        auto it = geometry_.find(kf.id);
        if (it != geometry_.end() && it->second.frame == kf.frame.get()) return &it->second.geometry;
        auto& slot = geometry_[kf.id];
        slot.frame = kf.frame.get();
        slot.geometry = prepare_source(*kf.frame, config_.model, config_.edge_lambda);
        return &slot.geometry;
    }

    struct GeometrySlot {
        const InputFrame* frame = nullptr;
        SourceGeometry geometry;
    };

    const KeyframeStore* store_;
    EngineConfig config_;
    std::unique_ptr<WorkerPool> pool_;
    FeatureCache cache_;
    TemporalState temporal_;
    Warper warper_;
    FusionBuffer buffer_;
    FusionBuffer depth_buffer_;
    std::unordered_map<KeyframeId, GeometrySlot> geometry_;
    std::unordered_map<KeyframeId, std::shared_ptr<const FeatureMap>> features_;
    std::vector<WarpSource> feature_sources_;
    std::vector<WarpSource> depth_sources_;
    std::uint64_t frame_index_ = 0;
};

}  // namespace livewarp
