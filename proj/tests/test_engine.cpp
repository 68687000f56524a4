// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <random>
#include <utility>

#include <gtest/gtest.h>

#include "livewarp/engine.hpp"
#include "livewarp/metrics.hpp"
#include "livewarp/synthetic.hpp"

using namespace livewarp;

namespace {

const synth::SplitDataset& small_room() {
    static const synth::SplitDataset d = synth::room_dataset(28, 7, 96, 72);
    return d;
}

void fill(KeyframeStore& store, const std::vector<InputFrame>& frames) {
    for (const auto& f : frames) store.insert(f);
}

EngineConfig unlimited(int n = 6) {
    EngineConfig c;
    c.select.num_views = n;
    c.select.tile_size = 16;
    c.select.coverage_downsample = 4;
    c.encode_budget = -1;
    return c;
}

std::vector<KeyframeId> iota_ids(int n) {
    std::vector<KeyframeId> ids;
    for (int i = 0; i < n; ++i) ids.push_back(i);
    return ids;
}

Pose jitter(const Pose& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.02, 0.02);
    Pose d = Pose::from_translation({u(rng), u(rng), u(rng)});
    d.rotation = Eigen::AngleAxisd(u(rng), Eigen::Vector3d(u(rng), 1.0, u(rng)).normalized()).toRotationMatrix();
    return d * p;
}

void expect_same_buffer(const FusionBuffer& a, const FusionBuffer& b) {
    EXPECT_EQ(a.depth(), b.depth());
    EXPECT_EQ(a.weight(), b.weight());
    EXPECT_EQ(a.count(), b.count());
    EXPECT_EQ(a.features(), b.features());
}

}  // namespace

TEST(Engine, LoopClosureMatchesRebuiltStore) {
    const auto& d = small_room();
    const auto ids = iota_ids(8);
    const Pose target = d.holdouts[0].pose;
    KeyframeStore live;
    fill(live, d.keyframes);
    RenderEngine a(live, unlimited(8));
    const RenderResult first = a.render(target, d.holdouts[0].intrinsics, &ids);
    EXPECT_EQ(first.encodes, 8u);

    std::mt19937_64 rng(81);
    PoseUpdateBatch batch;
    std::vector<InputFrame> corrected = d.keyframes;
    for (KeyframeId id : ids) {
        const Pose p = jitter(corrected[std::size_t(id)].pose, rng);
        batch.push_back({id, p});
        corrected[std::size_t(id)].pose = p;
    }
    live.apply_pose_updates(batch);
    a.reset_temporal();
    const RenderResult after = a.render(target, d.holdouts[0].intrinsics, &ids);
    EXPECT_EQ(after.encodes, 0u);
    EXPECT_EQ(after.cache_hits, 8u);

    KeyframeStore rebuilt;
    fill(rebuilt, corrected);
    RenderEngine b(rebuilt, unlimited(8));
    const RenderResult fresh = b.render(target, d.holdouts[0].intrinsics, &ids);
    expect_same_buffer(a.buffer(), b.buffer());
    EXPECT_EQ(after.frame.rgb, fresh.frame.rgb);
    EXPECT_NE(after.frame.rgb, first.frame.rgb);
}

TEST(Engine, CacheSizeIsInvisibleInOutput) {
    const auto& d = small_room();
    KeyframeStore store;
    fill(store, d.keyframes);
    EngineConfig tiny = unlimited(5);
    tiny.cache_capacity = 1;
    RenderEngine a(store, unlimited(5)), b(store, tiny);
    for (std::size_t j = 0; j < 2 * d.holdouts.size(); ++j) {
        const std::size_t i = j % d.holdouts.size();
        const RenderResult ra = a.render(d.holdouts[i].pose, d.holdouts[i].intrinsics);
        const RenderResult rb = b.render(d.holdouts[i].pose, d.holdouts[i].intrinsics);
        EXPECT_EQ(ra.frame.rgb, rb.frame.rgb);
        EXPECT_EQ(ra.feature_sources, rb.feature_sources);
    }
    EXPECT_GT(a.cache().stats().hits, b.cache().stats().hits);
}

TEST(Engine, ThreadCountDoesNotChangeOutput) {
    const auto& d = small_room();
    KeyframeStore store;
    fill(store, d.keyframes);
    EngineConfig threaded = unlimited(5);
    threaded.threads = 4;
    for (WarpMode mode : {WarpMode::Forward, WarpMode::Deferred}) {
        EngineConfig serial = unlimited(5);
        serial.mode = threaded.mode = mode;
        RenderEngine a(store, serial), b(store, threaded);
        const RenderResult ra = a.render(d.holdouts[1].pose, d.holdouts[1].intrinsics);
        const RenderResult rb = b.render(d.holdouts[1].pose, d.holdouts[1].intrinsics);
        EXPECT_EQ(ra.selection.ids, rb.selection.ids);
        expect_same_buffer(a.buffer(), b.buffer());
    }
}

TEST(Engine, EncodeBudgetBuildsUpOverFrames) {
    const auto& d = small_room();
    KeyframeStore store;
    fill(store, d.keyframes);
    EngineConfig c = unlimited(6);
    c.encode_budget = 2;
    RenderEngine e(store, c);
    const auto ids = iota_ids(6);
    std::vector<std::size_t> encodes, sources;
    for (int f = 0; f < 4; ++f) {
        const RenderResult r = e.render(d.holdouts[0].pose, d.holdouts[0].intrinsics, &ids);
        encodes.push_back(r.encodes);
        sources.push_back(r.feature_sources.size());
    }
    EXPECT_EQ(encodes, (std::vector<std::size_t>{2, 2, 2, 0}));
    EXPECT_EQ(sources, (std::vector<std::size_t>{2, 4, 6, 6}));
}

TEST(Engine, DeferredUsesDepthSourcesBeyondFeatureBudget) {
    const auto& d = small_room();
    KeyframeStore store;
    fill(store, d.keyframes);
    EngineConfig c = unlimited(3);
    c.mode = WarpMode::Deferred;
    c.deferred_depth_views = 6;
    RenderEngine e(store, c);
    const RenderResult r = e.render(d.holdouts[2].pose, d.holdouts[2].intrinsics);
    EXPECT_EQ(r.feature_sources.size(), 3u);
    EXPECT_EQ(r.depth_sources.size(), 6u);
    for (KeyframeId id : r.feature_sources) {
        EXPECT_TRUE(std::find(r.depth_sources.begin(), r.depth_sources.end(), id) != r.depth_sources.end());
    }
    EXPECT_GT(r.timings.sample_ms, 0.0);
}

TEST(Engine, ReconstructsHeldOutViews) {
    const auto& d = small_room();
    KeyframeStore store;
    fill(store, d.keyframes);
    RenderEngine e(store, unlimited(15));
    for (const auto& h : d.holdouts) {
        e.reset_temporal();
        const RenderResult r = e.render(h.pose, h.intrinsics);
        std::vector<std::uint8_t> covered(h.color.pixel_count());
        for (std::size_t i = 0; i < covered.size(); ++i) covered[i] = e.buffer().hole(i) ? 0 : 1;
        EXPECT_GT(masked_psnr(to_float(r.frame.rgb), to_float(h.color), covered), 32.0);
        EXPECT_LT(double(r.holes), 0.05 * h.color.pixel_count());
    }
}

TEST(Engine, RenderRejectsUnknownFixedId) {
    KeyframeStore store;
    fill(store, {small_room().keyframes[0]});
    RenderEngine e(store, unlimited());
    const std::vector<KeyframeId> ids{0, 9};
    EXPECT_THROW(e.render(Pose::identity(), small_room().keyframes[0].intrinsics, &ids), Error);
}

TEST(Engine, ReconfigureGuards) {
    KeyframeStore store;
    RenderEngine e(store, unlimited());
    EngineConfig c = unlimited();
    c.cache_capacity = 3;
    EXPECT_THROW(e.reconfigure(c), Error);
    c = unlimited();
    c.temporal_blend = 2.0f;
    EXPECT_THROW(e.reconfigure(c), Error);
    c = unlimited();
    c.temporal_blend = 0.3f;
    c.select.num_views = 2;
    e.reconfigure(c);
    EXPECT_FLOAT_EQ(e.temporal().blend(), 0.3f);
    EXPECT_EQ(e.config().select.num_views, 2);
}

TEST(Engine, EmptyStoreRendersBlack) {
    KeyframeStore store;
    RenderEngine e(store, unlimited());
    const Intrinsics k = synth::default_intrinsics(32, 24);
    const RenderResult r = e.render(Pose::identity(), k);
    EXPECT_EQ(r.holes, std::size_t(k.width * k.height));
    for (auto v : r.frame.rgb.data()) ASSERT_EQ(v, 0);
    EXPECT_EQ(r.frame.frame_index, 0u);
    EXPECT_EQ(e.render(Pose::identity(), k).frame.frame_index, 1u);
}

TEST(Synthetic, RoomIsClosed) {
    const synth::Scene s = synth::textured_room();
    const Intrinsics k = synth::default_intrinsics(64, 48);
    for (const Pose& p : synth::loop_trajectory(12)) {
        const InputFrame f = s.render(p, k);
        for (int y = 0; y < k.height; ++y) {
            for (int x = 0; x < k.width; ++x) ASSERT_GT(f.depth.at(x, y), 0.0f);
        }
    }
}

TEST(Synthetic, SplitFollowsHoldoutRule) {
    const auto d = synth::room_dataset(14, 7, 16, 12);
    EXPECT_EQ(d.keyframes.size(), 12u);
    ASSERT_EQ(d.holdouts.size(), 2u);
    EXPECT_DOUBLE_EQ(d.holdouts[0].timestamp, 3 / 30.0);
    EXPECT_DOUBLE_EQ(d.holdouts[1].timestamp, 10 / 30.0);
}
