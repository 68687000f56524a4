// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "livewarp/dataset.hpp"
#include "livewarp/engine.hpp"
#include "livewarp/metrics.hpp"
#include "livewarp/motion.hpp"
#include "livewarp/png_io.hpp"

namespace livewarp {

/// Which stream frames are held out: "every:K" takes i % K == K / 2,
/// "list:3,17,40" takes the given indices, "none" takes nothing.
struct HoldoutSpec {
    enum class Kind { None, Every, List };
    Kind kind = Kind::None;
    std::size_t every = 0;
    std::vector<std::size_t> list;

    static HoldoutSpec parse(std::string_view s) {
        HoldoutSpec h;
        auto number = [&](std::string_view t) {
            std::size_t v = 0;
            const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
                throw Error("holdout: bad number '" + std::string(t) + "' in '" + std::string(s) + "'");
            }
            return v;
        };
        if (s == "none") return h;
        if (s.starts_with("every:")) {
            h.kind = Kind::Every;
            h.every = number(s.substr(6));
            if (h.every < 2) throw Error("holdout: every:K needs K >= 2");
            return h;
        }
        if (s.starts_with("list:")) {
            h.kind = Kind::List;
            std::string_view rest = s.substr(5);
            if (rest.empty()) throw Error("holdout: list: needs at least one index");
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                h.list.push_back(number(rest.substr(0, comma)));
                if (comma == std::string_view::npos) break;
                rest = rest.substr(comma + 1);
            }
            std::sort(h.list.begin(), h.list.end());
            h.list.erase(std::unique(h.list.begin(), h.list.end()), h.list.end());
            return h;
        }
        throw Error("holdout: expected every:K, list:i,j,... or none, got '" + std::string(s) + "'");
    }

    /// Held-out indices for a stream of n frames, ascending.
    std::vector<std::size_t> indices(std::size_t n) const {
        std::vector<std::size_t> out;
        switch (kind) {
            case Kind::None: break;
            case Kind::Every:
                for (std::size_t i = 0; i < n; ++i) {
                    if (i % every == every / 2) out.push_back(i);
                }
                break;
            case Kind::List:
                for (std::size_t i : list) {
                    if (i >= n) {
                        throw Error("holdout: index " + std::to_string(i) + " outside dataset of " +
                                    std::to_string(n) + " frames");
                    }
                    out.push_back(i);
                }
                break;
        }
        return out;
    }

    std::string str() const {
        if (kind == Kind::None) return "none";
        if (kind == Kind::Every) return "every:" + std::to_string(every);
        std::string s = "list:";
        for (std::size_t i = 0; i < list.size(); ++i) s += (i ? "," : "") + std::to_string(list[i]);
        return s;
    }
};

struct ViewMetrics {
    std::size_t index = 0;  // position in the input stream
    double timestamp = 0.0;
    double psnr = 0.0;
    double l1 = 0.0;
    double ssim = 0.0;
    double hole_fraction = 0.0;
    int passes = 0;  // renders until no encode was deferred
};

struct MetricsReport {
    std::string mode;
    int num_views = 0;
    std::string holdout;
    std::size_t keyframes = 0;
    std::vector<ViewMetrics> views;

    double mean_psnr() const { return mean(&ViewMetrics::psnr); }
    double mean_l1() const { return mean(&ViewMetrics::l1); }
    double mean_ssim() const { return mean(&ViewMetrics::ssim); }
    double mean_hole_fraction() const { return mean(&ViewMetrics::hole_fraction); }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mode"] = mode;
        j["num_views"] = num_views;
        j["holdout"] = holdout;
        j["keyframes"] = keyframes;
        j["views"] = nlohmann::ordered_json::array();
        for (const auto& v : views) {
            j["views"].push_back({{"index", v.index},
                                  {"timestamp", v.timestamp},
                                  {"psnr", v.psnr},
                                  {"l1", v.l1},
                                  {"ssim", v.ssim},
                                  {"hole_fraction", v.hole_fraction},
                                  {"passes", v.passes}});
        }
        j["mean"] = {{"psnr", mean_psnr()},
                     {"l1", mean_l1()},
                     {"ssim", mean_ssim()},
                     {"hole_fraction", mean_hole_fraction()}};
        return j;
    }

private:
    double mean(double ViewMetrics::*field) const {
        if (views.empty()) return 0.0;
        double s = 0.0;
        for (const auto& v : views) s += v.*field;
        return s / double(views.size());
    }
};

struct EvalOptions {
    EngineConfig engine;
    HoldoutSpec holdout;
    bool select_keyframes = false;  // false: every non-held-out frame is a keyframe
    std::optional<std::filesystem::path> dump_dir;
    int max_passes = 64;
};

namespace detail {

inline void dump_view(const std::filesystem::path& dir, std::size_t index, const ComposedFrame& f,
                      const ColorImage& truth) {
    std::filesystem::create_directories(dir);
    char stem[32];
    std::snprintf(stem, sizeof stem, "view_%05zu", index);
    const std::string s = stem;
    png::write_rgb8(dir / (s + "_render.png"), f.rgb);
    png::write_rgb8(dir / (s + "_truth.png"), truth);
    png::write_gray8(dir / (s + "_depth.png"), f.depth_vis);
    png::write_rgb8(dir / (s + "_confidence.png"), f.conf_vis);
}

}  // namespace detail

/// Re-renders from a clean temporal state until no encode was deferred.
inline RenderResult render_settled(RenderEngine& engine, const Pose& pose, const Intrinsics& k,
                                   int max_passes = 64, int* passes = nullptr) {
    RenderResult r;
    int n = 0;
    do {
        engine.reset_temporal();
        r = engine.render(pose, k);
        ++n;
    } while (r.deferred > 0 && n < max_passes);
    if (passes) *passes = n;
    return r;
}

/// Fills `store` the way the service ingests a replayed stream.
inline void ingest_stream(KeyframeStore& store, const std::vector<InputFrame>& stream, bool select,
                          const KeyframeSelectorConfig& config = {}) {
    if (!select) {
        for (const auto& f : stream) store.insert(f);
        return;
    }
    for (const auto& e : select_keyframes(stream, config)) store.insert(e.frame);
}

/// Offline counterpart of a fresh service session: `frames` consecutive
/// renders at one pose, returning the last. frames == 0 gives the settled
/// image instead.
inline RenderResult render_offline(const KeyframeStore& store, const EngineConfig& config, const Pose& pose,
                                   const Intrinsics& k, int frames = 0) {
    RenderEngine engine(store, config);
    if (frames <= 0) return render_settled(engine, pose, k);
    RenderResult r;
    for (int i = 0; i < frames; ++i) r = engine.render(pose, k);
    return r;
}

/// Renders every held-out pose from the remaining frames and scores it against
/// the held-out colour. Each view starts from a clean temporal state and is
/// re-rendered until the encoder budget has caught up, so the score reflects
/// the settled image.
inline MetricsReport run_eval(const std::vector<InputFrame>& stream, const EvalOptions& opt) {
    opt.engine.validate();
    const std::vector<std::size_t> held = opt.holdout.indices(stream.size());
    std::vector<char> is_held(stream.size(), 0);
    for (std::size_t i : held) is_held[i] = 1;

    std::vector<InputFrame> rest;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        if (!is_held[i]) rest.push_back(stream[i]);
    }
    KeyframeStore store;
    ingest_stream(store, rest, opt.select_keyframes);

    MetricsReport report;
    report.mode = to_string(opt.engine.mode);
    report.num_views = opt.engine.select.num_views;
    report.holdout = opt.holdout.str();
    report.keyframes = store.size();
    if (held.empty()) return report;

    RenderEngine engine(store, opt.engine);
    for (std::size_t i : held) {
        const InputFrame& truth = stream[i];
        ViewMetrics m;
        m.index = i;
        m.timestamp = truth.timestamp;
        const RenderResult r = render_settled(engine, truth.pose, truth.intrinsics, opt.max_passes, &m.passes);
        const FloatImage a = to_float(r.frame.rgb);
        const FloatImage b = to_float(truth.color);
        m.psnr = psnr(a, b);
        m.l1 = l1(a, b);
        m.ssim = ssim(a, b);
        m.hole_fraction = double(r.holes) / double(truth.color.pixel_count());
        if (opt.dump_dir) detail::dump_view(*opt.dump_dir, i, r.frame, truth.color);
        report.views.push_back(m);
    }
    return report;
}

struct StageMeans {
    double select_ms = 0.0;
    double encode_ms = 0.0;
    double geometry_ms = 0.0;
    double project_ms = 0.0;
    double raster_ms = 0.0;
    double sample_ms = 0.0;
    double compose_ms = 0.0;
    double total_ms = 0.0;

    double stage_sum() const {
        return select_ms + encode_ms + geometry_ms + project_ms + raster_ms + sample_ms + compose_ms;
    }
    void add(const FrameTimings& t) {
        select_ms += t.select_ms;
        encode_ms += t.encode_ms;
        geometry_ms += t.geometry_ms;
        project_ms += t.project_ms;
        raster_ms += t.raster_ms;
        sample_ms += t.sample_ms;
        compose_ms += t.compose_ms;
        total_ms += t.total_ms;
    }
    void scale(double s) {
        select_ms *= s;
        encode_ms *= s;
        geometry_ms *= s;
        project_ms *= s;
        raster_ms *= s;
        sample_ms *= s;
        compose_ms *= s;
        total_ms *= s;
    }
};

struct TimingRow {
    WarpMode mode = WarpMode::Forward;
    bool with_selection = true;
    std::size_t frames = 0;
    StageMeans mean;
    double max_total_ms = 0.0;
    double mean_holes = 0.0;

    std::string label() const {
        return std::string(to_string(mode)) + (with_selection ? " incl. view selection" : "");
    }
};

struct TimingReport {
    int width = 0;
    int height = 0;
    int num_views = 0;
    unsigned threads = 1;
    std::size_t keyframes = 0;
    std::vector<TimingRow> rows;

    const TimingRow* find(WarpMode mode, bool with_selection) const {
        for (const auto& r : rows) {
            if (r.mode == mode && r.with_selection == with_selection) return &r;
        }
        return nullptr;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["width"] = width;
        j["height"] = height;
        j["num_views"] = num_views;
        j["threads"] = threads;
        j["keyframes"] = keyframes;
        j["rows"] = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            j["rows"].push_back({{"mode", to_string(r.mode)},
                                 {"view_selection", r.with_selection},
                                 {"frames", r.frames},
                                 {"select_ms", r.mean.select_ms},
                                 {"encode_ms", r.mean.encode_ms},
                                 {"geometry_ms", r.mean.geometry_ms},
                                 {"project_ms", r.mean.project_ms},
                                 {"raster_fuse_ms", r.mean.raster_ms},
                                 {"sample_ms", r.mean.sample_ms},
                                 {"compose_ms", r.mean.compose_ms},
                                 {"total_ms", r.mean.total_ms},
                                 {"max_total_ms", r.max_total_ms},
                                 {"mean_holes", r.mean_holes}});
        }
        return j;
    }

    /// Plain-text table, one row per configuration, means in milliseconds.
    std::string to_table() const {
        std::ostringstream os;
        char line[256];
        std::snprintf(line, sizeof line, "%dx%d, %d views, %u thread(s), %zu keyframes\n", width, height,
                      num_views, threads, keyframes);
        os << line;
        std::snprintf(line, sizeof line, "%-30s %8s %8s %8s %8s %8s %8s %8s %8s\n", "configuration", "select",
                      "encode", "mesh", "project", "raster", "sample", "compose", "total");
        os << line;
        for (const auto& r : rows) {
            const StageMeans& m = r.mean;
            std::snprintf(line, sizeof line, "%-30s %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f\n",
                          r.label().c_str(), m.select_ms, m.encode_ms, m.geometry_ms, m.project_ms,
                          m.raster_ms, m.sample_ms, m.compose_ms, m.total_ms);
            os << line;
        }
        return os.str();
    }
};

struct BenchOptions {
    EngineConfig engine;
    std::size_t frames = 256;
    std::vector<WarpMode> modes{WarpMode::Forward, WarpMode::Deferred};
    std::vector<bool> selection{true, false};
};

/// Camera path through the keyframe poses: frame i sits between keyframes
/// at parameter i * (K - 1) / frames, halfway-shifted so it never lands on a
/// keyframe exactly.
inline std::vector<Pose> benchmark_path(const Snapshot& snap, std::size_t frames) {
    std::vector<Pose> out;
    if (snap.empty()) return out;
    const auto kfs = snap.keyframes();
    for (std::size_t i = 0; i < frames; ++i) {
        if (kfs.size() == 1) {
            out.push_back(kfs[0].pose);
            continue;
        }
        const double s = (double(i) + 0.5) * double(kfs.size() - 1) / double(frames);
        const std::size_t a = std::min(kfs.size() - 2, static_cast<std::size_t>(s));
        out.push_back(interpolate(kfs[a].pose, kfs[a + 1].pose, s - double(a)));
    }
    return out;
}

/// Times the engine along `benchmark_path` for each requested mode, with
/// and without view selection. Without selection, the ids chosen by a
/// selection pass ahead of time are passed in as a fixed list so the same
/// views are rendered and only the selection cost is removed.
inline TimingReport run_benchmark(const KeyframeStore& store, const Intrinsics& k, const BenchOptions& opt) {
    opt.engine.validate();
    const Snapshot snap = store.snapshot();
    const std::vector<Pose> path = benchmark_path(snap, opt.frames);
    TimingReport rep;
    rep.width = k.width;
    rep.height = k.height;
    rep.num_views = opt.engine.select.num_views;
    rep.threads = opt.engine.threads;
    rep.keyframes = snap.size();

    for (WarpMode mode : opt.modes) {
        EngineConfig cfg = opt.engine;
        cfg.mode = mode;
        std::vector<std::vector<KeyframeId>> fixed;
        if (std::find(opt.selection.begin(), opt.selection.end(), false) != opt.selection.end()) {
            ViewSelectConfig sc = cfg.select;
            if (mode == WarpMode::Deferred && cfg.deferred_depth_views > 0) {
                sc.num_views = std::max(sc.num_views, cfg.deferred_depth_views);
            }
            for (const Pose& p : path) fixed.push_back(select_views(p, k, snap, cfg.model, sc).ids);
        }
        for (bool with_selection : opt.selection) {
            RenderEngine engine(store, cfg);
            TimingRow row;
            row.mode = mode;
            row.with_selection = with_selection;
            for (std::size_t i = 0; i < path.size(); ++i) {
                const RenderResult r = with_selection ? engine.render(path[i], k)
                                                      : engine.render(path[i], k, &fixed[i]);
                row.mean.add(r.timings);
                row.max_total_ms = std::max(row.max_total_ms, r.timings.total_ms);
                row.mean_holes += double(r.holes);
                ++row.frames;
            }
            if (row.frames) {
                row.mean.scale(1.0 / double(row.frames));
                row.mean_holes /= double(row.frames);
            }
            rep.rows.push_back(row);
        }
    }
    return rep;
}

}  // namespace livewarp
