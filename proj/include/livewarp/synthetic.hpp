// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "livewarp/dataset.hpp"

namespace livewarp::synth {

/// Axis-aligned box. The room is seen from inside, props from outside.
struct Box {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    Eigen::Vector3d tint{1.0, 1.0, 1.0};
    double checker = 0.25;  // meters per checker square
};

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Eigen::Vector3d point;
    int axis = 0;  // normal axis of the face hit
    const Box* box = nullptr;
};

/// Textured box room with box props; world +y points down.
struct Scene {
    Box room;
    std::vector<Box> props;

    /// Ray (origin, unit dir) against the scene; nullopt if nothing is hit.
    std::optional<Hit> cast(const Eigen::Vector3d& o, const Eigen::Vector3d& dir) const {
        Hit best;
        // Room interior: exit distance of the slab intersection.
        double t_exit = std::numeric_limits<double>::infinity();
        int exit_axis = -1;
        for (int a = 0; a < 3; ++a) {
            if (dir[a] == 0.0) continue;
            const double t = ((dir[a] > 0 ? room.hi[a] : room.lo[a]) - o[a]) / dir[a];
            if (t < t_exit) {
                t_exit = t;
                exit_axis = a;
            }
        }
        if (exit_axis >= 0 && t_exit > 0.0) {
            best.t = t_exit;
            best.axis = exit_axis;
            best.box = &room;
        }
        for (const Box& b : props) {
            double t0 = -std::numeric_limits<double>::infinity();
            double t1 = std::numeric_limits<double>::infinity();
            int enter_axis = -1;
            bool miss = false;
            for (int a = 0; a < 3 && !miss; ++a) {
                if (dir[a] == 0.0) {
                    miss = o[a] < b.lo[a] || o[a] > b.hi[a];
                    continue;
                }
                double ta = (b.lo[a] - o[a]) / dir[a];
                double tb = (b.hi[a] - o[a]) / dir[a];
                if (ta > tb) std::swap(ta, tb);
                if (ta > t0) {
                    t0 = ta;
                    enter_axis = a;
                }
                t1 = std::min(t1, tb);
                miss = t0 > t1;
            }
            if (miss || enter_axis < 0 || t0 <= 0.0 || t0 >= best.t) continue;
            best.t = t0;
            best.axis = enter_axis;
            best.box = &b;
        }
        if (!best.box) return std::nullopt;
        best.point = o + best.t * dir;
        return best;
    }

    /// Smooth texture on the face plane; values in [0,1].
    static Eigen::Vector3d shade(const Hit& h) {
        const int a = (h.axis + 1) % 3;
        const int b = (h.axis + 2) % 3;
        const double s = h.point[a], t = h.point[b];
        const double sq = h.box->checker;
        // Soft-edged checker: a smoothed square wave.
        auto soft = [](double x) { return std::tanh(3.0 * std::sin(x)); };
        const double c = soft(std::numbers::pi * s / sq) * soft(std::numbers::pi * t / sq);
        const double wave = std::sin(2.1 * s + 0.7 * t) * std::cos(1.3 * t - 0.4 * s);
        const Eigen::Vector3d face_base[3] = {{0.62, 0.48, 0.36}, {0.45, 0.55, 0.62}, {0.50, 0.60, 0.42}};
        Eigen::Vector3d col = face_base[h.axis].cwiseProduct(h.box->tint);
        col += Eigen::Vector3d(0.12, 0.10, 0.11) * c + Eigen::Vector3d(0.08, 0.05, -0.06) * wave;
        return col.cwiseMax(0.0).cwiseMin(1.0);
    }

    /// Renders colour and metric z-depth at pixel centers.
    InputFrame render(const Pose& pose, const Intrinsics& k, double timestamp = 0.0) const {
        InputFrame f;
        f.color = ColorImage(k.width, k.height, 3);
        f.depth = DepthImage(k.width, k.height, 1);
        f.pose = pose;
        f.intrinsics = k;
        f.timestamp = timestamp;
        const Eigen::Vector3d o = pose.center();
        for (int y = 0; y < k.height; ++y) {
            for (int x = 0; x < k.width; ++x) {
                const Eigen::Vector3d ray_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
                const Eigen::Vector3d dir = (pose.rotation * ray_cam).normalized();
                const auto hit = cast(o, dir);
                if (!hit) continue;
                const double z = (pose.rotation.transpose() * (hit->point - o)).z();
                f.depth.at(x, y) = static_cast<float>(z);
                const Eigen::Vector3d c = shade(*hit);
                for (int ch = 0; ch < 3; ++ch) f.color.at(x, y, ch) = to_u8(static_cast<float>(c[ch]));
            }
        }
        return f;
    }
};

/// 5 m x 2.6 m x 5 m room with a crate and a panel near the walls.
inline Scene textured_room() {
    Scene s;
    s.room = {{-2.5, -1.3, -2.5}, {2.5, 1.3, 2.5}, {1.0, 1.0, 1.0}, 0.3};
    s.props.push_back({{1.4, 0.6, 1.4}, {2.1, 1.3, 2.1}, {1.2, 0.8, 0.7}, 0.15});
    s.props.push_back({{-2.2, -0.6, -1.0}, {-2.0, 0.5, 0.4}, {0.7, 0.9, 1.3}, 0.2});
    return s;
}

inline Intrinsics default_intrinsics(int width = 640, int height = 480) {
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 525.0 * width / 640.0;
    k.cx = (width - 1) / 2.0;
    k.cy = (height - 1) / 2.0;
    return k;
}

/// Closed loop: the camera circles the room center, looking outward and
/// slightly ahead, with a gentle height and pitch wobble.
inline Pose loop_pose(double phase) {
    const double a = 2.0 * std::numbers::pi * phase;
    const Eigen::Vector3d eye(0.6 * std::cos(a), 0.1 * std::sin(3.0 * a), 0.6 * std::sin(a));
    const double look = a + 0.35;
    const Eigen::Vector3d target(3.0 * std::cos(look), 0.3 * std::sin(2.0 * a), 3.0 * std::sin(look));
    return look_at(eye, target);
}

inline std::vector<Pose> loop_trajectory(int n) {
    std::vector<Pose> poses;
    poses.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) poses.push_back(loop_pose(double(i) / n));
    return poses;
}

struct SplitDataset {
    std::vector<InputFrame> keyframes;
    std::vector<InputFrame> holdouts;
};

/// Renders `total` frames around the loop at 30 fps timestamps. Frame i is
/// held out when i % holdout_every == holdout_every / 2.
inline SplitDataset room_dataset(int total = 70, int holdout_every = 7, int width = 640,
                                 int height = 480) {
    const Scene scene = textured_room();
    const Intrinsics k = default_intrinsics(width, height);
    SplitDataset out;
    const auto poses = loop_trajectory(total);
    for (int i = 0; i < total; ++i) {
        InputFrame f = scene.render(poses[std::size_t(i)], k, i / 30.0);
        if (holdout_every > 0 && i % holdout_every == holdout_every / 2) {
            out.holdouts.push_back(std::move(f));
        } else {
            out.keyframes.push_back(std::move(f));
        }
    }
    return out;
}

}  // namespace livewarp::synth
