// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "livewarp/dataset.hpp"
#include "livewarp/geometry.hpp"

namespace livewarp {

/// Mean motion-vector length between consecutive frames.
struct MotionScore {
    double value = 0.0;           // pixels; +inf when undefined
    double valid_fraction = 0.0;  // sampled pixels that contributed
    bool defined() const { return valid_fraction > 0.0; }
};

/// Every sampled pixel of `prev` with valid depth is lifted, moved by the
/// relative pose and projected into `cur`. Samples that fall outside `cur` or
/// onto invalid depth there do not contribute. `stride` subsamples both axes.
inline MotionScore motion_score(const InputFrame& prev, const InputFrame& cur, int stride = 4) {
    if (!(prev.timestamp < cur.timestamp)) {
        throw Error("motion_score: frames out of order");
    }
    if (!(prev.intrinsics == cur.intrinsics)) {
        throw Error("motion_score: intrinsics differ");
    }
    if (stride < 1) stride = 1;
    const Intrinsics& k = prev.intrinsics;
    // Equal poses give an exactly zero score.
    const Pose rel = prev.pose == cur.pose ? Pose::identity() : relative_pose(prev.pose, cur.pose);

    double sum = 0.0;
    std::size_t sampled = 0;
    std::size_t used = 0;
    for (int y = 0; y < k.height; y += stride) {
        for (int x = 0; x < k.width; x += stride) {
            ++sampled;
            const double d = prev.depth.at(x, y);
            if (!(d > 0.0)) continue;
            const Point3 p = unproject({double(x), double(y), d}, k);
            const Point3 q = rel.transform(p);
            if (!(q.z() > 0.0)) continue;
            const double du = k.fx * (q.x() / q.z() - p.x() / p.z());
            const double dv = k.fy * (q.y() / q.z() - p.y() / p.z());
            const long xi = std::lround(x + du);
            const long yi = std::lround(y + dv);
            if (xi < 0 || yi < 0 || xi >= k.width || yi >= k.height) continue;
            if (!(cur.depth.at(int(xi), int(yi)) > 0.0f)) continue;
            sum += std::hypot(du, dv);
            ++used;
        }
    }
    MotionScore s;
    s.valid_fraction = sampled ? double(used) / double(sampled) : 0.0;
    s.value = used ? sum / double(used) : std::numeric_limits<double>::infinity();
    return s;
}

struct KeyframeSelectorConfig {
    double window = 1.0;              // seconds, anchored at the first frame
    int score_stride = 4;
    double min_valid_fraction = 0.2;  // frames below are never selected
};

struct KeyframeEvent {
    std::shared_ptr<const InputFrame> frame;
    std::size_t index = 0;  // position in the input stream
    MotionScore score;
    bool forced = false;    // the stream's first frame
};

/// Streaming windowed argmin over motion scores. Feed frames in timestamp
/// order; a window's keyframe is emitted once a frame of a later window
/// arrives (or on flush).
class KeyframeSelector {
public:
    explicit KeyframeSelector(KeyframeSelectorConfig config = {}) : config_(config) {}

    std::vector<KeyframeEvent> push(std::shared_ptr<const InputFrame> frame) {
        std::vector<KeyframeEvent> out;
        if (prev_ && !(frame->timestamp > prev_->timestamp)) {
            throw Error("keyframe selection: timestamps must be strictly increasing");
        }
        const std::size_t index = count_++;
        if (!prev_) {
            origin_ = frame->timestamp;
            window_ = 0;
            out.push_back({frame, index, {0.0, 1.0}, true});
            prev_ = std::move(frame);
            return out;
        }
        const long w = static_cast<long>(std::floor((frame->timestamp - origin_) / config_.window));
        if (w != window_) {
            close_window(out);
            window_ = w;
        }
        const MotionScore score = motion_score(*prev_, *frame, config_.score_stride);
        if (score.defined() && score.valid_fraction >= config_.min_valid_fraction &&
            (!best_ || score.value < best_->score.value)) {
            best_ = KeyframeEvent{frame, index, score, false};
        }
        prev_ = std::move(frame);
        return out;
    }

    std::vector<KeyframeEvent> flush() {
        std::vector<KeyframeEvent> out;
        close_window(out);
        return out;
    }

private:
    void close_window(std::vector<KeyframeEvent>& out) {
        if (best_) out.push_back(std::move(*best_));
        best_.reset();
    }

    KeyframeSelectorConfig config_;
    std::shared_ptr<const InputFrame> prev_;
    std::optional<KeyframeEvent> best_;
    double origin_ = 0.0;
    long window_ = 0;
    std::size_t count_ = 0;
};

/// Batch form of KeyframeSelector over a loaded stream.
inline std::vector<KeyframeEvent> select_keyframes(const std::vector<InputFrame>& stream,
                                                   KeyframeSelectorConfig config = {}) {
    KeyframeSelector selector(config);
    std::vector<KeyframeEvent> events;
    for (const auto& f : stream) {
        for (auto& e : selector.push(std::make_shared<const InputFrame>(f))) {
            events.push_back(std::move(e));
        }
    }
    for (auto& e : selector.flush()) events.push_back(std::move(e));
    return events;
}

}  // namespace livewarp
