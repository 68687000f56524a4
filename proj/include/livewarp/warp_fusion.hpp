// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <chrono>
#include <cmath>
#include <span>

#include "livewarp/fusion.hpp"
#include "livewarp/raster.hpp"

namespace livewarp {

/// Rasterizer sink applying the case-based fusion rule per fragment.
template <bool WithFeatures>
struct FusionSink {
    float* depth;
    float* weight;
    std::uint32_t* count;
    float* features;
    const DepthErrorModel* model;

    explicit FusionSink(FusionBuffer& buf, const DepthErrorModel& m)
        : depth(buf.depth()), weight(buf.weight()), count(buf.count()),
          features(WithFeatures ? buf.features() : nullptr), model(&m) {}

    void operator()(std::size_t i, float d_f, float w_f, const FragmentVertices& fv) {
        if constexpr (WithFeatures) {
            detail::fuse_into<kFeatureChannels>(
                depth[i], weight[i], count[i], features + i * kFeatureChannels, d_f, w_f,
                [&](float* out) { fv.interpolate(out); }, *model);
        } else {
            detail::fuse_into<0>(depth[i], weight[i], count[i], nullptr, d_f, w_f,
                                 [](float*) {}, *model);
        }
    }
};

struct WarpTimings {
    double project_ms = 0.0;  // vertex transform
    double raster_ms = 0.0;   // rasterization with in-place fusion
    double sample_ms = 0.0;   // deferred feature back-sampling
};

/// Forward and deferred screen-space fusion over a set of source views.
/// Owns reusable scratch; one Warper per render thread.
class Warper {
public:
    explicit Warper(WorkerPool* pool = nullptr, RasterConfig config = {})
        : pool_(pool), config_(config) {}

    const RasterConfig& config() const { return config_; }

    /// Rasterizes every source that has features into `out`, in span order.
    void fuse_forward(const WarpTarget& target, std::span<const WarpSource> sources,
                      const DepthErrorModel& model, FusionBuffer& out, WarpTimings* t = nullptr) {
        out.resize(target.intrinsics.width, target.intrinsics.height, true);
        FusionSink<true> sink(out, model);
        for (const auto& src : sources) {
            if (!src.features) continue;
            run_source(src, target, sink, t);
        }
    }

    /// Depth and weight only; identical arithmetic to fuse_forward.
    void fuse_depth(const WarpTarget& target, std::span<const WarpSource> sources,
                    const DepthErrorModel& model, FusionBuffer& out, WarpTimings* t = nullptr) {
        out.resize(target.intrinsics.width, target.intrinsics.height, false);
        FusionSink<false> sink(out, model);
        for (const auto& src : sources) run_source(src, target, sink, t);
    }

    /// Two stages: fuse target depth from `depth_sources`, then back-sample
    /// features from `feature_sources` at the fused depth. `stage1` receives
    /// the depth-only buffer when given.
    void fuse_deferred(const WarpTarget& target, std::span<const WarpSource> depth_sources,
                       std::span<const WarpSource> feature_sources, const DepthErrorModel& model,
                       FusionBuffer& out, FusionBuffer* stage1 = nullptr, WarpTimings* t = nullptr) {
        FusionBuffer& depth_buf = stage1 ? *stage1 : depth_scratch_;
        fuse_depth(target, depth_sources, model, depth_buf, t);
        const auto start = std::chrono::steady_clock::now();
        sample_features(target, depth_buf, feature_sources, model, out);
        if (t) t->sample_ms += elapsed_ms(start);
    }

private:
    static double elapsed_ms(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }

    template <typename Sink>
    void run_source(const WarpSource& src, const WarpTarget& target, Sink& sink, WarpTimings* t) {
        auto start = std::chrono::steady_clock::now();
        project_vertices(src, target, scratch_, config_, pool_);
        if (t) t->project_ms += elapsed_ms(start);
        start = std::chrono::steady_clock::now();
        const int w = target.intrinsics.width;
        const int h = target.intrinsics.height;
        if (pool_ && pool_->size() > 1) {
            const std::size_t bands = std::size_t(pool_->size()) * 4;
            const int rows = static_cast<int>((h + bands - 1) / bands);
            pool_->run(bands, [&](std::size_t b) {
                const int y0 = static_cast<int>(b) * rows;
                const int y1 = std::min(h, y0 + rows);
                if (y0 < y1) {
                    Sink local = sink;
                    rasterize_rows(src, scratch_, w, y0, y1, local);
                }
            });
        } else {
            rasterize_rows(src, scratch_, w, 0, h, sink);
        }
        if (t) t->raster_ms += elapsed_ms(start);
    }

    struct SampleView {
        Eigen::Matrix3f R;    // target camera -> source camera
        Eigen::Vector3f t;    // also the target center in source space
        const InputFrame* frame;
        const FeatureMap* features;
        float fx, fy, cx, cy;
        ImageCenter center;
    };

    void sample_features(const WarpTarget& target, const FusionBuffer& depth_buf,
                         std::span<const WarpSource> sources, const DepthErrorModel& model,
                         FusionBuffer& out) {
        const Intrinsics& tk = target.intrinsics;
        out.resize(tk.width, tk.height, true);
        views_.clear();
        for (const auto& s : sources) {
            if (!s.features) continue;
            const Pose rel = relative_pose(target.pose, s.pose);
            const Intrinsics& k = s.frame->intrinsics;
            views_.push_back({rel.rotation.cast<float>(), rel.translation.cast<float>(), s.frame,
                              s.features, float(k.fx), float(k.fy), float(k.cx), float(k.cy),
                              ImageCenter(k)});
        }
        const float near = config_.near_plane;
        const float tfx = float(tk.fx), tfy = float(tk.fy), tcx = float(tk.cx), tcy = float(tk.cy);

        auto do_row = [&](std::size_t row) {
            const int y = static_cast<int>(row);
            for (int x = 0; x < tk.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * tk.width + x;
                if (depth_buf.hole(i)) continue;
                const float d = depth_buf.depth()[i];
                const Eigen::Vector3f p((x - tcx) / tfx * d, (y - tcy) / tfy * d, d);
                float acc[kFeatureChannels] = {};
                float wsum = 0.0f;
                std::uint32_t used = 0;
                for (const auto& v : views_) {
                    const Eigen::Vector3f q = v.R * p + v.t;
                    const float z = q.z();
                    if (!(z > near)) continue;
                    const float u = v.fx * (q.x() / z) + v.cx;
                    const float vv = v.fy * (q.y() / z) + v.cy;
                    const Intrinsics& k = v.frame->intrinsics;
                    const long xi = std::lround(u);
                    const long yi = std::lround(vv);
                    if (xi < 0 || yi < 0 || xi >= k.width || yi >= k.height) continue;
                    const float d_f = v.frame->depth.at(int(xi), int(yi));
                    if (!(d_f > 0.0f)) continue;
                    const float r = std::abs(z - d_f) / model.band_f(z);
                    const float w_d = 1.0f - r * r;
                    if (!(w_d > 0.0f)) continue;
                    const Eigen::Vector3f to_eye = q - v.t;
                    const float denom = q.norm() * to_eye.norm();
                    const float w_v = denom > 0.0f ? std::max(0.0f, q.dot(to_eye) / denom) : 0.0f;
                    const float w_i = float(vignetting_weight(v.center.distance(u, vv), v.center.max_dist));
                    const float w = pow5(w_d * w_v * w_i);
                    if (!(w > 0.0f)) continue;
                    float f[kFeatureChannels];
                    if (!bilinear(*v.features, u, vv, f)) continue;
                    for (int c = 0; c < kFeatureChannels; ++c) acc[c] += w * f[c];
                    wsum += w;
                    ++used;
                }
                if (wsum > 0.0f) {
                    out.depth()[i] = d;
                    out.weight()[i] = wsum;
                    out.count()[i] = used;
                    float* dst = out.features() + i * kFeatureChannels;
                    for (int c = 0; c < kFeatureChannels; ++c) dst[c] = acc[c] / wsum;
                }
            }
        };
        if (pool_ && pool_->size() > 1) {
            pool_->run(static_cast<std::size_t>(tk.height), do_row);
        } else {
            for (int y = 0; y < tk.height; ++y) do_row(static_cast<std::size_t>(y));
        }
    }

    // Confidence-weighted bilinear lookup; false when no valid neighbour.
    static bool bilinear(const FeatureMap& fm, float u, float v, float* out) {
        const int w = fm.width(), h = fm.height();
        u = std::clamp(u, 0.0f, float(w - 1));
        v = std::clamp(v, 0.0f, float(h - 1));
        const int x0 = std::min(static_cast<int>(u), w - 1);
        const int y0 = std::min(static_cast<int>(v), h - 1);
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const float ax = u - x0, ay = v - y0;
        const int xs[4] = {x0, x1, x0, x1};
        const int ys[4] = {y0, y0, y1, y1};
        const float ws[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
        float total = 0.0f;
        for (int c = 0; c < kFeatureChannels; ++c) out[c] = 0.0f;
        for (int j = 0; j < 4; ++j) {
            const float wj = ws[j] * fm.confidence.at(xs[j], ys[j]);
            if (!(wj > 0.0f)) continue;
            const float* f = fm.at(xs[j], ys[j]);
            for (int c = 0; c < kFeatureChannels; ++c) out[c] += wj * f[c];
            total += wj;
        }
        if (!(total > 0.0f)) return false;
        for (int c = 0; c < kFeatureChannels; ++c) out[c] /= total;
        return true;
    }

    WorkerPool* pool_ = nullptr;
    RasterConfig config_;
    WarpScratch scratch_;
    FusionBuffer depth_scratch_;
    std::vector<SampleView> views_;
};

/// One-shot forms.
inline FusionBuffer fuse_forward(const WarpTarget& target, std::span<const WarpSource> sources,
                                 const DepthErrorModel& model) {
    Warper warper;
    FusionBuffer out;
    warper.fuse_forward(target, sources, model, out);
    return out;
}

inline FusionBuffer fuse_deferred(const WarpTarget& target, std::span<const WarpSource> depth_sources,
                                  std::span<const WarpSource> feature_sources,
                                  const DepthErrorModel& model) {
    Warper warper;
    FusionBuffer out;
    warper.fuse_deferred(target, depth_sources, feature_sources, model, out);
    return out;
}

}  // namespace livewarp
