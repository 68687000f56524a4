// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "livewarp/keyframe_store.hpp"
#include "livewarp/weighting.hpp"
#include "livewarp/raster.hpp"

namespace livewarp {

/// Tiling of the target image; edge tiles may be smaller.
struct TileGrid {
    int tile_size = 32;
    int width = 0;
    int height = 0;
    int tiles_x = 0;
    int tiles_y = 0;

    TileGrid() = default;
    TileGrid(int w, int h, int ts) : tile_size(ts), width(w), height(h) {
        if (ts <= 0) throw Error("tile grid: tile size must be positive");
        tiles_x = (w + ts - 1) / ts;
        tiles_y = (h + ts - 1) / ts;
    }

    std::size_t tile_count() const { return static_cast<std::size_t>(tiles_x) * tiles_y; }
    std::size_t tile_of(int x, int y) const {
        return static_cast<std::size_t>(y / tile_size) * tiles_x + x / tile_size;
    }
};

/// What one keyframe contributes to each target tile.
struct TileCoverage {
    KeyframeId id = 0;
    std::vector<std::uint32_t> samples;  // per tile
    std::vector<float> weight;           // per tile: mean w_f of its samples

    bool covers(std::size_t tile) const { return samples[tile] > 0; }
    std::size_t covered_tiles() const {
        return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                      [](auto s) { return s > 0; }));
    }
    /// Sum of per-tile weights over the whole grid, divided by the tile count.
    double mean_weight() const {
        if (weight.empty()) return 0.0;
        double s = 0.0;
        for (float w : weight) s += w;
        return s / double(weight.size());
    }
};

struct ViewSelectConfig {
    int num_views = 15;
    int tile_size = 32;
    int coverage_downsample = 8;
    float near_plane = 0.01f;
    std::size_t exact_cover_limit = 16;  // candidates; see select_views
};

namespace detail {

// Conservative test: true when all eight corners of the keyframe's
// truncated frustum lie outside one plane of the target frustum.
inline bool frustum_disjoint(const Keyframe& kf, const Pose& target_pose, const Intrinsics& tk,
                             float near_plane) {
    if (!kf.has_depth()) return true;
    const Intrinsics& k = kf.intrinsics();
    const Pose to_target = relative_pose(kf.pose, target_pose);
    std::array<Eigen::Vector3d, 8> corners;
    int i = 0;
    for (double d : {double(kf.min_depth), double(kf.max_depth)}) {
        for (double u : {-0.5, k.width - 0.5}) {
            for (double v : {-0.5, k.height - 0.5}) {
                corners[i++] = to_target.transform(
                    Eigen::Vector3d((u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d));
            }
        }
    }
    const double l = (-0.5 - tk.cx) / tk.fx, r = (tk.width - 0.5 - tk.cx) / tk.fx;
    const double t = (-0.5 - tk.cy) / tk.fy, b = (tk.height - 0.5 - tk.cy) / tk.fy;
    auto all_outside = [&](auto&& outside) {
        return std::all_of(corners.begin(), corners.end(), outside);
    };
    return all_outside([&](const Eigen::Vector3d& p) { return p.z() <= near_plane; }) ||
           all_outside([&](const Eigen::Vector3d& p) { return p.x() < l * p.z(); }) ||
           all_outside([&](const Eigen::Vector3d& p) { return p.x() > r * p.z(); }) ||
           all_outside([&](const Eigen::Vector3d& p) { return p.y() < t * p.z(); }) ||
           all_outside([&](const Eigen::Vector3d& p) { return p.y() > b * p.z(); });
}

}  // namespace detail

/// Forward-projects the keyframe's depth, subsampled by
/// `coverage_downsample`, into the target. Each landing sample adds its
/// fragment weight to its tile. Keyframes whose frustum misses the target
/// frustum return empty coverage without projecting.
inline TileCoverage estimate_coverage(const Keyframe& kf, const Pose& target_pose,
                                      const Intrinsics& tk, const TileGrid& grid,
                                      const DepthErrorModel& model, const ViewSelectConfig& cfg = {}) {
    TileCoverage cov;
    cov.id = kf.id;
    cov.samples.assign(grid.tile_count(), 0);
    cov.weight.assign(grid.tile_count(), 0.0f);
    if (detail::frustum_disjoint(kf, target_pose, tk, cfg.near_plane)) return cov;

    const InputFrame& frame = *kf.frame;
    const Intrinsics& k = frame.intrinsics;
    const ImageCenter center(k);
    const Pose rel = relative_pose(kf.pose, target_pose);
    const Eigen::Vector3d eye = -(rel.rotation.transpose() * rel.translation);
    const int step = std::max(1, cfg.coverage_downsample);
    std::vector<double> sum(grid.tile_count(), 0.0);
    for (int y = 0; y < k.height; y += step) {
        for (int x = 0; x < k.width; x += step) {
            const double d = frame.depth.at(x, y);
            if (!(d > 0.0)) continue;
            const Point3 p = unproject({double(x), double(y), d}, k);
            const Point3 q = rel.transform(p);
            if (!(q.z() > cfg.near_plane)) continue;
            const Pixel px = project(q, tk);
            const long u = std::lround(px.u);
            const long v = std::lround(px.v);
            if (u < 0 || v < 0 || u >= tk.width || v >= tk.height) continue;
            WeightInputs in;
            in.d_f = d;
            in.v_s = p.normalized();
            const Eigen::Vector3d to_eye = p - eye;
            in.v_t = to_eye.norm() > 0.0 ? to_eye.normalized() : Eigen::Vector3d::Zero();
            in.c_dist = center.distance(x, y);
            in.c_max = center.max_dist;
            const std::size_t tile = grid.tile_of(int(u), int(v));
            ++cov.samples[tile];
            sum[tile] += pow5(float(weight_base(in, model)));
        }
    }
    for (std::size_t t = 0; t < grid.tile_count(); ++t) {
        if (cov.samples[t]) cov.weight[t] = static_cast<float>(sum[t] / cov.samples[t]);
    }
    return cov;
}

struct ViewSelection {
    std::vector<KeyframeId> ids;         // descending mean weight, <= N
    std::vector<KeyframeId> tile_owner;  // per tile; -1 = uncovered
    std::size_t coverage_estimates = 0;  // one per candidate
    bool exact_cover_used = false;

    std::size_t uncovered_tiles() const {
        return static_cast<std::size_t>(std::count(tile_owner.begin(), tile_owner.end(), -1));
    }
};

namespace detail {

// Smallest subset (size <= budget) covering every tile in `need`, preferring
// higher total mean weight, then lexicographically smaller indices.
inline std::vector<std::size_t> exact_cover(const std::vector<TileCoverage>& cov,
                                            const std::vector<std::size_t>& cand,
                                            const std::vector<char>& need, std::size_t budget) {
    const std::size_t n = cand.size();
    std::vector<std::size_t> pick;
    for (std::size_t k = 1; k <= std::min(budget, n); ++k) {
        std::vector<std::size_t> best;
        double best_w = -1.0;
        std::vector<std::size_t> idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = i;
        for (;;) {
            bool all = true;
            for (std::size_t t = 0; t < need.size() && all; ++t) {
                if (!need[t]) continue;
                bool hit = false;
                for (std::size_t i : idx) hit = hit || cov[cand[i]].covers(t);
                all = hit;
            }
            if (all) {
                double w = 0.0;
                for (std::size_t i : idx) w += cov[cand[i]].mean_weight();
                if (w > best_w) {
                    best_w = w;
                    best = idx;
                }
            }
            // next combination
            std::size_t i = k;
            while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
        }
        if (!best.empty()) {
            for (std::size_t i : best) pick.push_back(cand[i]);
            return pick;
        }
    }
    return pick;
}

}  // namespace detail

/// Chooses up to N source views from precomputed coverages.
///
/// Greedy set cover: repeatedly take the candidate covering the most
/// uncovered tiles, ties to the higher mean weight over those tiles, then to
/// the lower id. If greedy runs out of budget before covering every coverable
/// tile and there are at most `exact_cover_limit` useful candidates, the
/// cover is replaced by an exhaustive minimum cover. Leftover budget goes to
/// the remaining candidates with the highest mean weight.
inline ViewSelection select_from_coverage(const std::vector<TileCoverage>& cov,
                                          std::size_t tile_count, const ViewSelectConfig& cfg) {
    if (cfg.num_views < 1) throw Error("view selection: N must be at least 1");
    const std::size_t budget = static_cast<std::size_t>(cfg.num_views);
    ViewSelection sel;
    sel.coverage_estimates = cov.size();
    sel.tile_owner.assign(tile_count, -1);

    std::vector<std::size_t> useful;
    std::vector<char> coverable(tile_count, 0);
    for (std::size_t i = 0; i < cov.size(); ++i) {
        if (cov[i].covered_tiles() == 0) continue;
        useful.push_back(i);
        for (std::size_t t = 0; t < tile_count; ++t) coverable[t] |= cov[i].covers(t) ? 1 : 0;
    }

    std::vector<char> covered(tile_count, 0);
    std::vector<char> taken(cov.size(), 0);
    std::vector<std::size_t> picked;
    auto take = [&](std::size_t i) {
        picked.push_back(i);
        taken[i] = 1;
        for (std::size_t t = 0; t < tile_count; ++t) covered[t] |= cov[i].covers(t) ? 1 : 0;
    };

    while (picked.size() < budget) {
        long best = -1;
        std::size_t best_gain = 0;
        double best_w = -1.0;
        for (std::size_t i : useful) {
            if (taken[i]) continue;
            std::size_t gain = 0;
            double w = 0.0;
            for (std::size_t t = 0; t < tile_count; ++t) {
                if (!covered[t] && cov[i].covers(t)) {
                    ++gain;
                    w += cov[i].weight[t];
                }
            }
            if (gain == 0) continue;
            w /= double(gain);
            if (gain > best_gain || (gain == best_gain && w > best_w) ||
                (gain == best_gain && w == best_w && cov[i].id < cov[std::size_t(best)].id)) {
                best = static_cast<long>(i);
                best_gain = gain;
                best_w = w;
            }
        }
        if (best < 0) break;
        take(static_cast<std::size_t>(best));
    }

    const bool complete = std::equal(covered.begin(), covered.end(), coverable.begin());
    if (!complete && useful.size() <= cfg.exact_cover_limit) {
        auto exact = detail::exact_cover(cov, useful, coverable, budget);
        if (!exact.empty()) {
            std::fill(covered.begin(), covered.end(), 0);
            std::fill(taken.begin(), taken.end(), 0);
            picked.clear();
            for (std::size_t i : exact) take(i);
            sel.exact_cover_used = true;
        }
    }

    // Fill the remaining budget by global mean weight.
    std::vector<std::size_t> rest;
    for (std::size_t i : useful) {
        if (!taken[i]) rest.push_back(i);
    }
    auto by_weight = [&](std::size_t a, std::size_t b) {
        const double wa = cov[a].mean_weight(), wb = cov[b].mean_weight();
        return wa != wb ? wa > wb : cov[a].id < cov[b].id;
    };
    std::sort(rest.begin(), rest.end(), by_weight);
    for (std::size_t i : rest) {
        if (picked.size() >= budget) break;
        take(i);
    }

    std::sort(picked.begin(), picked.end(), by_weight);
    for (std::size_t i : picked) sel.ids.push_back(cov[i].id);

    for (std::size_t t = 0; t < tile_count; ++t) {
        long owner = -1;
        float best_w = -1.0f;
        for (std::size_t i : picked) {
            if (!cov[i].covers(t)) continue;
            if (cov[i].weight[t] > best_w ||
                (cov[i].weight[t] == best_w && cov[i].id < cov[std::size_t(owner)].id)) {
                best_w = cov[i].weight[t];
                owner = static_cast<long>(i);
            }
        }
        sel.tile_owner[t] = owner < 0 ? -1 : cov[std::size_t(owner)].id;
    }
    return sel;
}

/// Estimates coverage for every candidate (in parallel when a pool is
/// given) and selects.
inline ViewSelection select_views(const Pose& target_pose, const Intrinsics& tk,
                                  const Snapshot& candidates, const DepthErrorModel& model,
                                  const ViewSelectConfig& cfg = {}, WorkerPool* pool = nullptr) {
    if (cfg.num_views < 1) throw Error("view selection: N must be at least 1");
    const TileGrid grid(tk.width, tk.height, cfg.tile_size);
    std::vector<TileCoverage> cov(candidates.size());
    auto estimate = [&](std::size_t i) {
        cov[i] = estimate_coverage(candidates.keyframes()[i], target_pose, tk, grid, model, cfg);
    };
    if (pool && pool->size() > 1) {
        pool->run(cov.size(), estimate);
    } else {
        for (std::size_t i = 0; i < cov.size(); ++i) estimate(i);
    }
    return select_from_coverage(cov, grid.tile_count(), cfg);
}

}  // namespace livewarp
