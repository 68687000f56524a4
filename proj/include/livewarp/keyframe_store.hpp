// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "livewarp/dataset.hpp"

namespace livewarp {

using KeyframeId = std::int64_t;

/// A retained input frame. Color, depth and intrinsics live in the keyframe's
/// own camera space and never change; only the pose does.
struct Keyframe {
    KeyframeId id = 0;
    std::shared_ptr<const InputFrame> frame;
    Pose pose;                     // camera-to-world, overrides frame->pose
    std::uint64_t generation = 0;  // bumped on every pose update
    float min_depth = 0.0f;        // valid depth range, for frustum tests
    float max_depth = 0.0f;

    const Intrinsics& intrinsics() const { return frame->intrinsics; }
    bool has_depth() const { return max_depth > 0.0f; }
};

struct PoseUpdate {
    KeyframeId id = 0;
    Pose pose;
};
using PoseUpdateBatch = std::vector<PoseUpdate>;

/// Immutable point-in-time view of the store, sorted by id.
class Snapshot {
public:
    Snapshot() : items_(std::make_shared<const std::vector<Keyframe>>()) {}
    explicit Snapshot(std::shared_ptr<const std::vector<Keyframe>> items) : items_(std::move(items)) {}

    std::span<const Keyframe> keyframes() const { return *items_; }
    std::size_t size() const { return items_->size(); }
    bool empty() const { return items_->empty(); }
    auto begin() const { return items_->begin(); }
    auto end() const { return items_->end(); }

    const Keyframe* find(KeyframeId id) const {
        auto it = std::lower_bound(items_->begin(), items_->end(), id,
                                   [](const Keyframe& k, KeyframeId v) { return k.id < v; });
        return it != items_->end() && it->id == id ? &*it : nullptr;
    }

private:
    std::shared_ptr<const std::vector<Keyframe>> items_;
};

/// Copy-on-write keyframe container. Readers take snapshots; a writer
/// publishes a new version under a short lock, so renders holding an older
/// snapshot are never blocked or torn.
class KeyframeStore {
public:
    KeyframeStore() = default;
    KeyframeStore(const KeyframeStore&) = delete;
    KeyframeStore& operator=(const KeyframeStore&) = delete;

    /// Inserts with the next free id and the frame's own pose.
    KeyframeId insert(InputFrame frame) {
        return insert(std::make_shared<const InputFrame>(std::move(frame)));
    }

    KeyframeId insert(std::shared_ptr<const InputFrame> frame) {
        std::lock_guard lock(write_mutex_);
        Keyframe kf;
        kf.id = next_id_locked();
        kf.pose = frame->pose;
        kf.frame = std::move(frame);
        return insert_locked(std::move(kf));
    }

    /// Inserts with an explicit id; duplicates are rejected.
    KeyframeId insert(Keyframe kf) {
        std::lock_guard lock(write_mutex_);
        return insert_locked(std::move(kf));
    }

    /// Replaces all poses in `batch` in one published version. Unknown ids
    /// reject the whole batch.
    void apply_pose_updates(const PoseUpdateBatch& batch) {
        if (batch.empty()) return;
        std::lock_guard lock(write_mutex_);
        auto next = std::make_shared<std::vector<Keyframe>>(*current());
        for (const auto& u : batch) {
            auto it = std::lower_bound(next->begin(), next->end(), u.id,
                                       [](const Keyframe& k, KeyframeId v) { return k.id < v; });
            if (it == next->end() || it->id != u.id) {
                throw Error("pose update: unknown keyframe id " + std::to_string(u.id));
            }
            if (!u.pose.is_valid(1e-6)) {
                throw Error("pose update: invalid pose for keyframe " + std::to_string(u.id));
            }
        }
        for (const auto& u : batch) {
            auto it = std::lower_bound(next->begin(), next->end(), u.id,
                                       [](const Keyframe& k, KeyframeId v) { return k.id < v; });
            it->pose = u.pose;
            ++it->generation;
        }
        publish(std::move(next));
    }

    Snapshot snapshot() const {
        std::lock_guard lock(publish_mutex_);
        return Snapshot(items_);
    }

    std::size_t size() const { return snapshot().size(); }

private:
    std::shared_ptr<const std::vector<Keyframe>> current() const {
        std::lock_guard lock(publish_mutex_);
        return items_;
    }

    void publish(std::shared_ptr<const std::vector<Keyframe>> next) {
        std::lock_guard lock(publish_mutex_);
        items_ = std::move(next);
    }

    KeyframeId next_id_locked() const {
        auto items = current();
        return items->empty() ? 0 : items->back().id + 1;
    }

    KeyframeId insert_locked(Keyframe kf) {
        if (!kf.frame) throw Error("keyframe insert: missing frame");
        kf.frame->validate();
        auto items = current();
        auto next = std::make_shared<std::vector<Keyframe>>(*items);
        auto it = std::lower_bound(next->begin(), next->end(), kf.id,
                                   [](const Keyframe& k, KeyframeId v) { return k.id < v; });
        if (it != next->end() && it->id == kf.id) {
            throw Error("keyframe insert: duplicate id " + std::to_string(kf.id));
        }
        float lo = std::numeric_limits<float>::max();
        float hi = 0.0f;
        for (float d : kf.frame->depth.data()) {
            if (d > 0.0f) {
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
        }
        kf.min_depth = hi > 0.0f ? lo : 0.0f;
        kf.max_depth = hi;
        const KeyframeId id = kf.id;
        next->insert(it, std::move(kf));
        publish(std::move(next));
        return id;
    }

    mutable std::mutex write_mutex_;    // serializes writers
    mutable std::mutex publish_mutex_;  // guards the pointer swap only
    std::shared_ptr<const std::vector<Keyframe>> items_ =
        std::make_shared<const std::vector<Keyframe>>();
};

}  // namespace livewarp
