// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "livewarp/eval.hpp"
#include "livewarp/protocol.hpp"
#include "livewarp/service.hpp"
#include "livewarp/synthetic.hpp"

using namespace livewarp;

namespace {

struct DatasetArgs {
    std::string dataset = "synthetic";
    int synth_frames = 70;
    int synth_width = 640;
    int synth_height = 480;
    double depth_scale = 5000.0;
    std::string keyframes;  // "motion" or "all"; empty: subcommand default
};

struct EngineArgs {
    EngineConfig cfg;
    std::string mode = "forward";
};

void add_dataset_options(CLI::App* app, DatasetArgs& d, const char* keyframes_default) {
    app->add_option("--dataset", d.dataset,
                    "Dataset directory, or 'synthetic' / 'synthetic:N' for the generated room")
        ->capture_default_str();
    app->add_option("--synth-width", d.synth_width, "Synthetic frame width")->capture_default_str();
    app->add_option("--synth-height", d.synth_height, "Synthetic frame height")->capture_default_str();
    app->add_option("--depth-scale", d.depth_scale, "Depth PNG units per meter")->capture_default_str();
    d.keyframes = keyframes_default;
    app->add_option("--keyframes", d.keyframes, "Keyframe policy: motion (windowed selection) or all")
        ->check(CLI::IsMember({"motion", "all"}))
        ->capture_default_str();
}

void add_engine_options(CLI::App* app, EngineArgs& e) {
    EngineConfig& c = e.cfg;
    app->add_option("--mode", e.mode, "Warp mode")->check(CLI::IsMember({"forward", "deferred"}))->capture_default_str();
    app->add_option("--num-views", c.select.num_views, "Source views per frame")->check(CLI::Range(1, 256))->capture_default_str();
    app->add_option("--tile-size", c.select.tile_size, "View-selection tile size (px)")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--coverage-downsample", c.select.coverage_downsample, "Coverage estimate downsampling")
        ->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--cache-capacity", c.cache_capacity, "Feature cache capacity (maps)")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--encode-budget", c.encode_budget, "New encodes per frame, -1 for unlimited")->capture_default_str();
    app->add_option("--deferred-depth-views", c.deferred_depth_views, "Depth-only views in deferred mode, 0 = num-views")
        ->capture_default_str();
    app->add_option("--edge-lambda", c.edge_lambda, "Occlusion edge threshold in fusion band widths")->capture_default_str();
    app->add_option("--band-kappa", c.model.band_kappa, "Fusion band kappa (1/m): band = kappa d^2")->capture_default_str();
    app->add_option("--delta-a", c.model.a, "Depth error model a")->capture_default_str();
    app->add_option("--delta-b", c.model.b, "Depth error model b")->capture_default_str();
    app->add_option("--delta-c", c.model.c, "Depth error model c")->capture_default_str();
    app->add_flag("--strict-paper-delta", c.model.strict_paper_mode, "Use Delta(d) itself as the fusion band");
    app->add_option("--conf-k", c.compose.conf_k, "Confidence map k")->capture_default_str();
    app->add_option("--temporal-blend", c.temporal_blend, "Temporal feedback factor")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--depth-near", c.compose.depth_near, "Depth visualization near plane (m)")->capture_default_str();
    app->add_option("--depth-far", c.compose.depth_far, "Depth visualization far plane (m)")->capture_default_str();
    app->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1u, 256u))->capture_default_str();
}

EngineConfig finish(const EngineArgs& e) {
    EngineConfig c = e.cfg;
    c.mode = e.mode == "deferred" ? WarpMode::Deferred : WarpMode::Forward;
    c.validate();
    return c;
}

std::vector<InputFrame> load(const DatasetArgs& d) {
    if (d.dataset == "synthetic" || d.dataset.starts_with("synthetic:")) {
        int n = d.synth_frames;
        if (d.dataset.size() > 10) n = std::stoi(d.dataset.substr(10));
        if (n < 1) throw Error("synthetic dataset needs at least one frame");
        const synth::Scene scene = synth::textured_room();
        const Intrinsics k = synth::default_intrinsics(d.synth_width, d.synth_height);
        std::vector<InputFrame> out;
        const auto poses = synth::loop_trajectory(n);
        for (int i = 0; i < n; ++i) out.push_back(scene.render(poses[std::size_t(i)], k, i / 30.0));
        return out;
    }
    DatasetFormat fmt;
    fmt.depth_scale = d.depth_scale;
    auto frames = load_stream(d.dataset, fmt);
    if (frames.empty()) throw Error("dataset " + d.dataset + " has no usable frames");
    return frames;
}

Pose parse_pose_arg(const std::string& text) {
    std::istringstream in(text);
    nlohmann::json arr = nlohmann::json::array();
    double v = 0.0;
    while (in >> v) arr.push_back(v);
    if (!in.eof()) throw Error("--pose: expected 7 numbers, got '" + text + "'");
    return protocol::parse_pose(arr);
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

Intrinsics output_intrinsics(const std::vector<InputFrame>& stream, int width, int height) {
    const Intrinsics& k = stream.front().intrinsics;
    return k.scaled_to(width > 0 ? width : k.width, height > 0 ? height : k.height);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"livewarp: real-time novel view synthesis for RGB-D streams"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic room as a dataset directory");
    std::string synth_out;
    int synth_frames = 70, synth_w = 640, synth_h = 480;
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--frames", synth_frames, "Frames around the loop")->check(CLI::PositiveNumber)->capture_default_str();
    synth_cmd->add_option("--width", synth_w, "Width")->check(CLI::PositiveNumber)->capture_default_str();
    synth_cmd->add_option("--height", synth_h, "Height")->check(CLI::PositiveNumber)->capture_default_str();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Render held-out views and score them");
    DatasetArgs eval_data;
    EngineArgs eval_engine;
    std::string holdout = "every:10", eval_out, dump_dir;
    add_dataset_options(eval_cmd, eval_data, "all");
    add_engine_options(eval_cmd, eval_engine);
    eval_cmd->add_option("--holdout", holdout, "every:K, list:i,j,... or none")->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "Report JSON path");
    eval_cmd->add_option("--dump", dump_dir, "Directory for per-view PNGs");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Time the pipeline along the keyframe trajectory");
    DatasetArgs bench_data;
    EngineArgs bench_engine;
    std::size_t bench_frames = 256;
    int bench_w = 640, bench_h = 480;
    std::string bench_out;
    add_dataset_options(bench_cmd, bench_data, "all");
    add_engine_options(bench_cmd, bench_engine);
    bench_cmd->add_option("--frames", bench_frames, "Frames per configuration")->check(CLI::PositiveNumber)->capture_default_str();
    bench_cmd->add_option("--width", bench_w, "Output width")->capture_default_str();
    bench_cmd->add_option("--height", bench_h, "Output height")->capture_default_str();
    bench_cmd->add_option("--out", bench_out, "Report JSON path");

    // render
    auto* render_cmd = app.add_subcommand("render", "Render one pose offline");
    DatasetArgs render_data;
    EngineArgs render_engine;
    std::string pose_text, render_out, view = "color";
    int render_frames = 0, render_w = 0, render_h = 0;
    add_dataset_options(render_cmd, render_data, "motion");
    add_engine_options(render_cmd, render_engine);
    render_cmd->add_option("--pose", pose_text, "\"tx ty tz qx qy qz qw\", camera to world")->required();
    render_cmd->add_option("--out", render_out, "Output PNG")->required();
    render_cmd->add_option("--view", view, "Output image")->check(CLI::IsMember({"color", "depth", "confidence"}))->capture_default_str();
    render_cmd->add_option("--frames", render_frames,
                           "Consecutive renders at the pose, as a fresh service session would stream; 0 renders until settled")
        ->capture_default_str();
    render_cmd->add_option("--width", render_w, "Output width (default: dataset)");
    render_cmd->add_option("--height", render_h, "Output height (default: dataset)");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Replay a dataset and stream renders over WebSocket");
    DatasetArgs serve_data;
    EngineArgs serve_engine;
    ServiceConfig scfg;
    std::string listen = "127.0.0.1:8765";
    add_dataset_options(serve_cmd, serve_data, "motion");
    add_engine_options(serve_cmd, serve_engine);
    serve_cmd->add_option("--listen", listen, "ADDRESS:PORT")->capture_default_str();
    serve_cmd->add_option("--replay-fps", scfg.replay_fps, "Input replay rate, 0 = as fast as possible")->capture_default_str();
    serve_cmd->add_option("--render-fps", scfg.render_fps, "Target frame rate")->check(CLI::Range(0.1, 240.0))->capture_default_str();
    serve_cmd->add_option("--width", scfg.width, "Output width")->check(CLI::PositiveNumber)->capture_default_str();
    serve_cmd->add_option("--height", scfg.height, "Output height")->check(CLI::PositiveNumber)->capture_default_str();
    serve_cmd->add_flag("--png", scfg.png, "Send PNG-compressed frames");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            DatasetArgs d;
            d.synth_width = synth_w;
            d.synth_height = synth_h;
            d.dataset = "synthetic:" + std::to_string(synth_frames);
            write_dataset(synth_out, load(d));
            std::printf("wrote %d frames to %s\n", synth_frames, synth_out.c_str());
        } else if (*eval_cmd) {
            EvalOptions opt;
            opt.engine = finish(eval_engine);
            opt.holdout = HoldoutSpec::parse(holdout);
            opt.select_keyframes = eval_data.keyframes == "motion";
            if (!dump_dir.empty()) opt.dump_dir = dump_dir;
            const MetricsReport rep = run_eval(load(eval_data), opt);
            for (const auto& v : rep.views) {
                std::printf("view %5zu  psnr %6.2f  l1 %.4f  ssim %.4f  holes %.4f  passes %d\n", v.index, v.psnr,
                            v.l1, v.ssim, v.hole_fraction, v.passes);
            }
            std::printf("mean (%zu views, %zu keyframes): psnr %.2f  l1 %.4f  ssim %.4f  holes %.4f\n",
                        rep.views.size(), rep.keyframes, rep.mean_psnr(), rep.mean_l1(), rep.mean_ssim(),
                        rep.mean_hole_fraction());
            if (!eval_out.empty()) write_json(eval_out, rep.to_json());
        } else if (*bench_cmd) {
            const auto stream = load(bench_data);
            KeyframeStore store;
            ingest_stream(store, stream, bench_data.keyframes == "motion");
            BenchOptions opt;
            opt.engine = finish(bench_engine);
            opt.frames = bench_frames;
            const TimingReport rep = run_benchmark(store, output_intrinsics(stream, bench_w, bench_h), opt);
            std::fputs(rep.to_table().c_str(), stdout);
            if (!bench_out.empty()) write_json(bench_out, rep.to_json());
        } else if (*render_cmd) {
            const auto stream = load(render_data);
            KeyframeStore store;
            ingest_stream(store, stream, render_data.keyframes == "motion");
            const Intrinsics k = output_intrinsics(stream, render_w, render_h);
            const RenderResult r = render_offline(store, finish(render_engine), parse_pose_arg(pose_text), k, render_frames);
            png::write_rgb8(render_out, frame_for_mode(r.frame, *parse_view_mode(view)));
            std::printf("%s: %zu sources, %.2f%% holes\n", render_out.c_str(), r.feature_sources.size(),
                        100.0 * double(r.holes) / double(k.width * k.height));
        } else if (*serve_cmd) {
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos) throw Error("--listen: expected ADDRESS:PORT");
            scfg.address = listen.substr(0, colon);
            scfg.port = static_cast<unsigned short>(std::stoi(listen.substr(colon + 1)));
            scfg.engine = finish(serve_engine);
            scfg.select_keyframes = serve_data.keyframes == "motion";
            scfg.log = [](const std::string& m) { std::fprintf(stderr, "livewarp: %s\n", m.c_str()); };

            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);
            RenderService service(load(serve_data), scfg);
            service.start();
            int sig = 0;
            sigwait(&signals, &sig);
            std::fprintf(stderr, "livewarp: shutting down\n");
            service.stop();
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "livewarp: %s\n", e.what());
        return 1;
    }
    return 0;
}
