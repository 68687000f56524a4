// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "livewarp/dataset.hpp"
#include "livewarp/encoder.hpp"
#include "livewarp/parallel.hpp"
#include "livewarp/weighting.hpp"

namespace livewarp {

/// Implicit grid triangulation of a depth map. Cell (x, y) spans vertices
/// (x, y)..(x+1, y+1) and holds two triangles split along the main diagonal:
///   upper: (x,y) (x+1,y) (x+1,y+1)
///   lower: (x,y) (x+1,y+1) (x,y+1)
struct DepthMesh {
    static constexpr std::uint8_t kUpper = 1;
    static constexpr std::uint8_t kLower = 2;

    int width = 0;   // vertex grid, equal to the depth map size
    int height = 0;
    std::vector<std::uint8_t> cells;  // (width-1) * (height-1) validity masks

    int cells_x() const { return std::max(0, width - 1); }
    int cells_y() const { return std::max(0, height - 1); }

    bool valid(int cx, int cy, std::uint8_t tri) const {
        return (cells[static_cast<std::size_t>(cy) * cells_x() + cx] & tri) != 0;
    }

    std::size_t valid_triangles() const {
        std::size_t n = 0;
        for (auto c : cells) n += ((c & kUpper) != 0) + ((c & kLower) != 0);
        return n;
    }
};

/// Valid iff all depths are positive and their spread is within
/// edge_lambda fusion bands at the mean depth.
inline bool triangle_valid(float d0, float d1, float d2, const DepthErrorModel& model,
                           float edge_lambda) {
    if (!(d0 > 0.0f && d1 > 0.0f && d2 > 0.0f)) return false;
    const float hi = std::max({d0, d1, d2});
    const float lo = std::min({d0, d1, d2});
    const float mean = (d0 + d1 + d2) / 3.0f;
    return hi - lo <= edge_lambda * model.band_f(mean);
}

inline DepthMesh triangulate(const DepthImage& depth, const DepthErrorModel& model,
                             float edge_lambda = 3.0f) {
    DepthMesh mesh;
    mesh.width = depth.width();
    mesh.height = depth.height();
    mesh.cells.assign(static_cast<std::size_t>(mesh.cells_x()) * mesh.cells_y(), 0);
    for (int y = 0; y < mesh.cells_y(); ++y) {
        for (int x = 0; x < mesh.cells_x(); ++x) {
            const float d00 = depth.at(x, y);
            const float d10 = depth.at(x + 1, y);
            const float d01 = depth.at(x, y + 1);
            const float d11 = depth.at(x + 1, y + 1);
            std::uint8_t m = 0;
            if (triangle_valid(d00, d10, d11, model, edge_lambda)) m |= DepthMesh::kUpper;
            if (triangle_valid(d00, d11, d01, model, edge_lambda)) m |= DepthMesh::kLower;
            mesh.cells[static_cast<std::size_t>(y) * mesh.cells_x() + x] = m;
        }
    }
    return mesh;
}

/// Pose-independent per-keyframe data, computed once per keyframe.
struct SourceGeometry {
    DepthMesh mesh;
    std::vector<float> static_weight;  // w_d(source depth) * w_i per pixel
};

inline SourceGeometry prepare_source(const InputFrame& frame, const DepthErrorModel& model,
                                     float edge_lambda) {
    SourceGeometry g;
    g.mesh = triangulate(frame.depth, model, edge_lambda);
    const Intrinsics& k = frame.intrinsics;
    const ImageCenter center(k);
    g.static_weight.resize(frame.depth.pixel_count());
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const float d = frame.depth.at(x, y);
            const std::size_t i = static_cast<std::size_t>(y) * k.width + x;
            g.static_weight[i] =
                d > 0.0f ? model.depth_weight(d) *
                               float(vignetting_weight(center.distance(x, y), center.max_dist))
                         : 0.0f;
        }
    }
    return g;
}

struct WarpTarget {
    Pose pose;  // camera-to-world
    Intrinsics intrinsics;
};

/// One source view as seen by the rasterizer. `features` may be null for
/// depth-only passes.
struct WarpSource {
    KeyframeId id = 0;
    const InputFrame* frame = nullptr;
    Pose pose;  // current camera-to-world pose
    const SourceGeometry* geometry = nullptr;
    const FeatureMap* features = nullptr;
};

struct RasterConfig {
    float near_plane = 0.01f;        // meters; triangles touching it are culled
    float guard_band = 1 << 16;      // pixels; triangles with a vertex beyond are culled
};

/// Screen-space vertex, fixed point with kSubpixelBits fractional bits.
/// Coordinates stay within 2^28 so edge products fit comfortably in 64 bits.
struct ProjectedVertex {
    std::int32_t x = 0;
    std::int32_t y = 0;
    float inv_z = -1.0f;  // <= 0 marks an unusable vertex
    float base = 0.0f;    // interpolated weight base w_d w_v w_i
};

inline constexpr int kSubpixelBits = 12;
inline constexpr std::int32_t kSubpixelOne = 1 << kSubpixelBits;

/// Reusable per-warp storage; sized once per source resolution.
struct WarpScratch {
    std::vector<ProjectedVertex> vertices;
    std::vector<std::int32_t> row_min;  // per vertex row, fixed-point y range
    std::vector<std::int32_t> row_max;
    std::vector<float> ray_x;
    std::vector<float> ray_y;
};

/// The three vertices' features and perspective-correct barycentrics of a
/// fragment. `f` is null in depth-only passes.
struct FragmentVertices {
    const float* f[3];
    float l[3];

    void interpolate(float* out) const {
        for (int c = 0; c < kFeatureChannels; ++c) {
            out[c] = l[0] * f[0][c] + l[1] * f[1][c] + l[2] * f[2][c];
        }
    }
};

/// Transforms every valid source pixel into the target view. Rows are split
/// across `pool` when given.
inline void project_vertices(const WarpSource& src, const WarpTarget& target, WarpScratch& s,
                             const RasterConfig& cfg = {}, WorkerPool* pool = nullptr) {
    const Intrinsics& k = src.frame->intrinsics;
    const Intrinsics& tk = target.intrinsics;
    const std::size_t n = static_cast<std::size_t>(k.width) * k.height;
    if (s.vertices.size() != n) s.vertices.resize(n);
    s.row_min.resize(k.height);
    s.row_max.resize(k.height);
    s.ray_x.resize(k.width);
    s.ray_y.resize(k.height);
    for (int x = 0; x < k.width; ++x) s.ray_x[x] = float((x - k.cx) / k.fx);
    for (int y = 0; y < k.height; ++y) s.ray_y[y] = float((y - k.cy) / k.fy);

    const Pose rel = relative_pose(src.pose, target.pose);
    const Eigen::Matrix3f R = rel.rotation.cast<float>();
    const Eigen::Vector3f t = rel.translation.cast<float>();
    const Eigen::Vector3f eye = (-(rel.rotation.transpose() * rel.translation)).cast<float>();
    const float tfx = float(tk.fx), tfy = float(tk.fy), tcx = float(tk.cx), tcy = float(tk.cy);
    const float near = cfg.near_plane;
    const float guard = cfg.guard_band;
    const float* static_w = src.geometry->static_weight.data();

    auto do_row = [&](std::size_t row) {
        const int y = static_cast<int>(row);
        const float ry = s.ray_y[y];
        const Eigen::Vector3f row_dir = ry * R.col(1) + R.col(2);
        std::int32_t lo = std::numeric_limits<std::int32_t>::max();
        std::int32_t hi = std::numeric_limits<std::int32_t>::min();
        const float* depth = src.frame->depth.pixel(0, y);
        ProjectedVertex* out = s.vertices.data() + static_cast<std::size_t>(y) * k.width;
        const float* sw = static_w + static_cast<std::size_t>(y) * k.width;
        for (int x = 0; x < k.width; ++x) {
            ProjectedVertex& v = out[x];
            const float d = depth[x];
            v.inv_z = -1.0f;
            if (!(d > 0.0f)) continue;
            const float rx = s.ray_x[x];
            const Eigen::Vector3f dir = rx * R.col(0) + row_dir;
            const Eigen::Vector3f q = d * dir + t;
            if (!(q.z() > near)) continue;
            const float iz = 1.0f / q.z();
            const float u = tfx * (q.x() * iz) + tcx;
            const float vv = tfy * (q.y() * iz) + tcy;
            if (!(std::abs(u) < guard && std::abs(vv) < guard)) continue;
            v.x = static_cast<std::int32_t>(std::lrint(u * kSubpixelOne));
            v.y = static_cast<std::int32_t>(std::lrint(vv * kSubpixelOne));
            v.inv_z = iz;
            // View-direction term, evaluated in source camera space.
            const Eigen::Vector3f p(rx * d, ry * d, d);
            const Eigen::Vector3f to_eye = p - eye;
            const float denom = std::sqrt(p.squaredNorm() * to_eye.squaredNorm());
            const float cosv = denom > 0.0f ? p.dot(to_eye) / denom : 0.0f;
            v.base = sw[x] * std::max(0.0f, cosv);
            lo = std::min(lo, v.y);
            hi = std::max(hi, v.y);
        }
        s.row_min[y] = lo;
        s.row_max[y] = hi;
    };
    if (pool && pool->size() > 1) {
        pool->run(static_cast<std::size_t>(k.height), do_row);
    } else {
        for (int y = 0; y < k.height; ++y) do_row(static_cast<std::size_t>(y));
    }
}

namespace detail {

inline std::int32_t ceil_px(std::int32_t fixed) {
    return -((-fixed) >> kSubpixelBits);
}
inline std::int32_t floor_px(std::int32_t fixed) { return fixed >> kSubpixelBits; }

// Top-left rule for the positive-area winding used below (y down).
inline std::int64_t edge_bias(std::int32_t dx, std::int32_t dy) {
    return (dy < 0 || (dy == 0 && dx > 0)) ? 0 : -1;
}

template <typename Sink>
inline void draw_triangle(const ProjectedVertex* verts, const float* feats, std::size_t ia,
                          std::size_t ib, std::size_t ic, int width, int y_begin, int y_end,
                          Sink& sink) {
    const ProjectedVertex* A = verts + ia;
    const ProjectedVertex* B = verts + ib;
    const ProjectedVertex* C = verts + ic;
    if (!(A->inv_z > 0.0f && B->inv_z > 0.0f && C->inv_z > 0.0f)) return;

    const std::int32_t min_x = std::min({A->x, B->x, C->x});
    const std::int32_t max_x = std::max({A->x, B->x, C->x});
    const std::int32_t min_y = std::min({A->y, B->y, C->y});
    const std::int32_t max_y = std::max({A->y, B->y, C->y});
    const int x0 = std::max(ceil_px(min_x), 0);
    const int x1 = std::min(floor_px(max_x), width - 1);
    const int y0 = std::max(ceil_px(min_y), y_begin);
    const int y1 = std::min(floor_px(max_y), y_end - 1);
    if (x0 > x1 || y0 > y1) return;

    std::int64_t area = std::int64_t(B->x - A->x) * (C->y - A->y) -
                        std::int64_t(B->y - A->y) * (C->x - A->x);
    if (area == 0) return;
    if (area < 0) {
        std::swap(B, C);
        std::swap(ib, ic);
        area = -area;
    }

    // E_PQ(p) = (Qx - Px)(py - Py) - (Qy - Py)(px - Px); weights: A <- E_BC,
    // B <- E_CA, C <- E_AB.
    const std::int32_t bc_dx = C->x - B->x, bc_dy = C->y - B->y;
    const std::int32_t ca_dx = A->x - C->x, ca_dy = A->y - C->y;
    const std::int32_t ab_dx = B->x - A->x, ab_dy = B->y - A->y;
    const std::int64_t bias_bc = edge_bias(bc_dx, bc_dy);
    const std::int64_t bias_ca = edge_bias(ca_dx, ca_dy);
    const std::int64_t bias_ab = edge_bias(ab_dx, ab_dy);

    const float farea = static_cast<float>(area);
    FragmentVertices fv;
    if (feats) {
        fv.f[0] = feats + ia * kFeatureChannels;
        fv.f[1] = feats + ib * kFeatureChannels;
        fv.f[2] = feats + ic * kFeatureChannels;
    } else {
        fv.f[0] = fv.f[1] = fv.f[2] = nullptr;
    }

    for (int py = y0; py <= y1; ++py) {
        const std::int64_t fy = std::int64_t(py) << kSubpixelBits;
        const std::int64_t fx0 = std::int64_t(x0) << kSubpixelBits;
        std::int64_t e_bc = std::int64_t(bc_dx) * (fy - B->y) - std::int64_t(bc_dy) * (fx0 - B->x);
        std::int64_t e_ca = std::int64_t(ca_dx) * (fy - C->y) - std::int64_t(ca_dy) * (fx0 - C->x);
        std::int64_t e_ab = std::int64_t(ab_dx) * (fy - A->y) - std::int64_t(ab_dy) * (fx0 - A->x);
        const std::int64_t step_bc = -std::int64_t(bc_dy) * kSubpixelOne;
        const std::int64_t step_ca = -std::int64_t(ca_dy) * kSubpixelOne;
        const std::int64_t step_ab = -std::int64_t(ab_dy) * kSubpixelOne;
        const std::size_t row = static_cast<std::size_t>(py) * width;
        for (int px = x0; px <= x1; ++px, e_bc += step_bc, e_ca += step_ca, e_ab += step_ab) {
            if ((e_bc + bias_bc) < 0 || (e_ca + bias_ca) < 0 || (e_ab + bias_ab) < 0) continue;
            const float q0 = static_cast<float>(e_bc) * A->inv_z;
            const float q1 = static_cast<float>(e_ca) * B->inv_z;
            const float q2 = static_cast<float>(e_ab) * C->inv_z;
            const float s = q0 + q1 + q2;
            if (!(s > 0.0f)) continue;
            const float inv = 1.0f / s;
            fv.l[0] = q0 * inv;
            fv.l[1] = q1 * inv;
            fv.l[2] = q2 * inv;
            const float depth = farea * inv;
            const float base = fv.l[0] * A->base + fv.l[1] * B->base + fv.l[2] * C->base;
            sink(row + px, depth, pow5(base), fv);
        }
    }
}

}  // namespace detail

/// Rasterizes the valid triangles of `src` whose pixels fall in target rows
/// [y_begin, y_end). Fragments reach `sink(pixel_index, depth, w_f,
/// FragmentVertices)` in triangle order (cell row, cell column, upper then
/// lower). No allocation happens here.
template <typename Sink>
inline void rasterize_rows(const WarpSource& src, const WarpScratch& s, int target_width,
                           int y_begin, int y_end, Sink& sink) {
    const DepthMesh& mesh = src.geometry->mesh;
    const int w = mesh.width;
    const std::int32_t band_lo = y_begin * kSubpixelOne - kSubpixelOne;
    const std::int32_t band_hi = y_end * kSubpixelOne;
    const ProjectedVertex* verts = s.vertices.data();
    const float* feats = src.features ? src.features->channels.data().data() : nullptr;
    for (int cy = 0; cy < mesh.cells_y(); ++cy) {
        const std::int32_t lo = std::min(s.row_min[cy], s.row_min[cy + 1]);
        const std::int32_t hi = std::max(s.row_max[cy], s.row_max[cy + 1]);
        if (hi < band_lo || lo > band_hi) continue;
        const std::uint8_t* masks = mesh.cells.data() + static_cast<std::size_t>(cy) * mesh.cells_x();
        for (int cx = 0; cx < mesh.cells_x(); ++cx) {
            const std::uint8_t m = masks[cx];
            if (!m) continue;
            const std::size_t i00 = static_cast<std::size_t>(cy) * w + cx;
            const std::size_t i10 = i00 + 1;
            const std::size_t i01 = i00 + w;
            const std::size_t i11 = i01 + 1;
            if (m & DepthMesh::kUpper) {
                detail::draw_triangle(verts, feats, i00, i10, i11, target_width, y_begin, y_end, sink);
            }
            if (m & DepthMesh::kLower) {
                detail::draw_triangle(verts, feats, i00, i11, i01, target_width, y_begin, y_end, sink);
            }
        }
    }
}

/// Single-threaded convenience: project and rasterize one source into the
/// whole target image.
template <typename Sink>
inline void rasterize(const WarpSource& src, const WarpTarget& target, Sink& sink,
                      WarpScratch& scratch, const RasterConfig& cfg = {}) {
    project_vertices(src, target, scratch, cfg);
    rasterize_rows(src, scratch, target.intrinsics.width, 0, target.intrinsics.height, sink);
}

/// Collects full Fragment records; for tests and diagnostics.
struct FragmentCollector {
    int width = 0;
    KeyframeId source = 0;
    std::vector<Fragment> fragments;

    void operator()(std::size_t pixel, float depth, float weight, const FragmentVertices& fv) {
        Fragment f;
        f.x = static_cast<int>(pixel % width);
        f.y = static_cast<int>(pixel / width);
        f.depth = depth;
        f.weight = weight;
        f.source = source;
        if (fv.f[0]) fv.interpolate(f.feature.data());
        fragments.push_back(f);
    }
};

}  // namespace livewarp
