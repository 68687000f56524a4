// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include "livewarp/keyframe_store.hpp"
#include "test_util.hpp"

using namespace livewarp;

namespace {

InputFrame small_frame(double t) {
    return lwtest::plane_frame(lwtest::make_k(8, 6, 10.0), Pose::from_translation({t, 0, 0}), t, 1.5);
}

}  // namespace

TEST(KeyframeStore, EmptySnapshot) {
    KeyframeStore store;
    EXPECT_TRUE(store.snapshot().empty());
}

TEST(KeyframeStore, InsertAssignsSequentialIds) {
    KeyframeStore store;
    EXPECT_EQ(store.insert(small_frame(0.0)), 0);
    EXPECT_EQ(store.insert(small_frame(1.0)), 1);
    const Snapshot s = store.snapshot();
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.keyframes()[0].id, 0);
    EXPECT_EQ(s.keyframes()[1].id, 1);
    EXPECT_FLOAT_EQ(s.keyframes()[0].min_depth, 1.5f);
    EXPECT_FLOAT_EQ(s.keyframes()[0].max_depth, 1.5f);
}

TEST(KeyframeStore, DuplicateIdRejected) {
    KeyframeStore store;
    store.insert(small_frame(0.0));
    Keyframe kf;
    kf.id = 0;
    kf.frame = std::make_shared<const InputFrame>(small_frame(2.0));
    EXPECT_THROW(store.insert(kf), Error);
    EXPECT_EQ(store.size(), 1u);
}

TEST(KeyframeStore, PoseUpdateBumpsGeneration) {
    KeyframeStore store;
    store.insert(small_frame(0.5));
    store.insert(small_frame(1.0));
    store.apply_pose_updates({{0, Pose::identity()}});
    const Snapshot s = store.snapshot();
    EXPECT_EQ(s.find(0)->pose, Pose::identity());
    EXPECT_EQ(s.find(0)->generation, 1u);
    EXPECT_EQ(s.find(1)->generation, 0u);
}

TEST(KeyframeStore, EmptyBatchIsNoOp) {
    KeyframeStore store;
    store.insert(small_frame(0.5));
    const Snapshot before = store.snapshot();
    store.apply_pose_updates({});
    const Snapshot after = store.snapshot();
    EXPECT_EQ(after.find(0)->generation, 0u);
    EXPECT_EQ(&before.keyframes()[0], &after.keyframes()[0]);
}

TEST(KeyframeStore, UnknownIdRejectsWholeBatch) {
    KeyframeStore store;
    store.insert(small_frame(0.5));
    const Pose moved = Pose::from_translation({9, 9, 9});
    EXPECT_THROW(store.apply_pose_updates({{0, moved}, {7, moved}}), Error);
    EXPECT_EQ(store.snapshot().find(0)->generation, 0u);
    EXPECT_NE(store.snapshot().find(0)->pose, moved);
}

TEST(KeyframeStore, SnapshotIsStable) {
    KeyframeStore store;
    store.insert(small_frame(0.5));
    const Snapshot s = store.snapshot();
    const Pose original = s.find(0)->pose;
    store.apply_pose_updates({{0, Pose::from_translation({3, 0, 0})}});
    store.insert(small_frame(2.0));
    EXPECT_EQ(s.size(), 1u);
    EXPECT_EQ(s.find(0)->pose, original);
    EXPECT_EQ(store.snapshot().size(), 2u);
}

TEST(KeyframeStore, ReadersNeverSeePartialBatches) {
    KeyframeStore store;
    for (int i = 0; i < 16; ++i) store.insert(small_frame(i));
    std::atomic<bool> stop{false};
    std::atomic<int> torn{0};
    std::thread reader([&] {
        while (!stop) {
            const Snapshot s = store.snapshot();
            const auto g = s.keyframes()[0].generation;
            for (const auto& kf : s) {
                if (kf.generation != g) ++torn;
            }
        }
    });
    for (int round = 1; round <= 200; ++round) {
        PoseUpdateBatch batch;
        for (int i = 0; i < 16; ++i) batch.push_back({i, Pose::from_translation({double(round), 0, 0})});
        store.apply_pose_updates(batch);
    }
    stop = true;
    reader.join();
    EXPECT_EQ(torn.load(), 0);
    EXPECT_EQ(store.snapshot().find(5)->generation, 200u);
}
