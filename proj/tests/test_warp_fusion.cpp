// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <random>
#include <utility>

#include <gtest/gtest.h>

#include "livewarp/encoder.hpp"
#include "livewarp/warp_fusion.hpp"
#include "test_util.hpp"

using namespace livewarp;

namespace {

struct Source {
    std::shared_ptr<InputFrame> frame;
    SourceGeometry geometry;
    FeatureMap features;

    WarpSource view(bool with_features = true) const {
        WarpSource s;
        s.frame = frame.get();
        s.pose = frame->pose;
        s.geometry = &geometry;
        s.features = with_features ? &features : nullptr;
        return s;
    }
};

Source make_source(InputFrame f, KeyframeId id = 0) {
    Source s;
    s.frame = std::make_shared<InputFrame>(std::move(f));
    s.geometry = prepare_source(*s.frame, {}, 3.0f);
    s.features = ReferenceEncoder::encode_frame(id, *s.frame);
    return s;
}

// Smooth wavy surface with a textured colour.
InputFrame wavy(const Intrinsics& k, const Pose& pose, double phase) {
    return lwtest::make_frame(
        k, pose, 0.0,
        [&](int x, int y) { return 2.0 + 0.2 * std::sin(0.11 * x + phase) + 0.15 * std::cos(0.07 * y); },
        [](int x, int y) {
            return std::array<std::uint8_t, 3>{std::uint8_t(x * 7 % 256), std::uint8_t(y * 5 % 256),
                                               std::uint8_t((x + y) * 3 % 256)};
        });
}

std::vector<Source> wavy_sources(const Intrinsics& k, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    std::vector<Source> out;
    for (int i = 0; i < n; ++i) {
        Pose p = Pose::from_translation({u(rng), u(rng), u(rng)});
        p.rotation = Eigen::AngleAxisd(u(rng), Eigen::Vector3d::UnitY()).toRotationMatrix();
        out.push_back(make_source(wavy(k, p, 0.3 * i), KeyframeId(i)));
    }
    return out;
}

std::vector<WarpSource> views(const std::vector<Source>& s, bool with_features = true) {
    std::vector<WarpSource> v;
    for (const auto& x : s) v.push_back(x.view(with_features));
    return v;
}

}  // namespace

TEST(Deferred, StageOneDepthBitIdenticalToForward) {
    const Intrinsics k = lwtest::make_k(80, 60, 70.0);
    const auto srcs = wavy_sources(k, 4, 31);
    const auto v = views(srcs);
    const WarpTarget target{Pose::from_translation({0.01, -0.02, 0.0}), k};
    Warper warper;
    FusionBuffer fwd, stage1, def;
    warper.fuse_forward(target, v, {}, fwd);
    warper.fuse_deferred(target, v, v, {}, def, &stage1);
    ASSERT_GT(fwd.size() - fwd.hole_count(), fwd.size() / 2);
    EXPECT_EQ(std::as_const(stage1).depth(), std::as_const(fwd).depth());
    EXPECT_EQ(std::as_const(stage1).weight(), std::as_const(fwd).weight());
    EXPECT_EQ(std::as_const(stage1).count(), std::as_const(fwd).count());
}

TEST(Deferred, ColocatedSourceMatchesForward) {
    const Intrinsics k = lwtest::make_k(64, 48, 60.0);
    const Source s = make_source(wavy(k, Pose::identity(), 0.0));
    const std::vector<WarpSource> v{s.view()};
    const WarpTarget target{Pose::identity(), k};
    const FusionBuffer fwd = fuse_forward(target, v, {});
    const FusionBuffer def = fuse_deferred(target, v, v, {});
    std::size_t compared = 0;
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const std::size_t i = std::size_t(y) * k.width + x;
            if (fwd.hole(i)) continue;
            ASSERT_FALSE(def.hole(i));
            EXPECT_EQ(def.depth()[i], fwd.depth()[i]);
            for (int c = 0; c < kFeatureChannels; ++c) {
                EXPECT_NEAR(def.feature(i)[c], fwd.feature(i)[c], 1e-4) << x << "," << y << " c" << c;
            }
            ++compared;
        }
    }
    EXPECT_GT(compared, std::size_t(k.width * k.height) * 9 / 10);
}

TEST(Deferred, ZeroWeightCornerIsHole) {
    // The corner pixel sits at c_max: forward keeps its zero-weight fragment,
    // deferred has zero stage-2 weight there.
    const Intrinsics k = lwtest::make_k(33, 25, 30.0);
    const Source s = make_source(lwtest::plane_frame(k, Pose::identity(), 0.0, 2.0));
    const std::vector<WarpSource> v{s.view()};
    const WarpTarget target{Pose::identity(), k};
    const FusionBuffer fwd = fuse_forward(target, v, {});
    const FusionBuffer def = fuse_deferred(target, v, v, {});
    ASSERT_FALSE(fwd.hole(0));
    EXPECT_EQ(fwd.weight()[0], 0.0f);
    EXPECT_TRUE(def.hole(0));
    EXPECT_FALSE(def.hole(std::size_t(12) * k.width + 16));
}

TEST(Forward, DuplicateSourceLeavesFeaturesUnchanged) {
    const Intrinsics k = lwtest::make_k(40, 30, 35.0);
    const Source s = make_source(wavy(k, Pose::identity(), 0.0));
    const WarpTarget target{Pose::from_translation({0.02, 0, 0}), k};
    const std::vector<WarpSource> one{s.view()};
    const std::vector<WarpSource> two{s.view(), s.view()};
    const FusionBuffer a = fuse_forward(target, one, {});
    const FusionBuffer b = fuse_forward(target, two, {});
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a.hole(i), b.hole(i));
        if (a.hole(i)) continue;
        EXPECT_NEAR(b.depth()[i], a.depth()[i], 1e-6f * a.depth()[i]);
        EXPECT_NEAR(b.weight()[i], 2.0f * a.weight()[i], 1e-6f * a.weight()[i]);
        for (int c = 0; c < kFeatureChannels; ++c) EXPECT_NEAR(b.feature(i)[c], a.feature(i)[c], 1e-5);
    }
}

TEST(Deferred, FarFeatureSourceContributesNothing) {
    const Intrinsics k = lwtest::make_k(32, 24, 30.0);
    const Source near = make_source(lwtest::plane_frame(k, Pose::identity(), 0, 1.0));
    const Source far = make_source(lwtest::plane_frame(k, Pose::identity(), 0, 1.5));
    const std::vector<WarpSource> d{near.view(false)};
    const std::vector<WarpSource> f{far.view()};
    const FusionBuffer out = fuse_deferred({Pose::identity(), k}, d, f, {});
    EXPECT_EQ(out.hole_count(), out.size());
}

TEST(Deferred, DepthWeightFallsOffWithinBand) {
    // Feature sources at 1 m + 0.5 band and 1 m + 0.9 band: both contribute, the
    // closer one with weight (1 - 0.25)^5 against (1 - 0.81)^5.
    const Intrinsics k = lwtest::make_k(16, 12, 15.0);
    const DepthErrorModel m;
    const double band = m.band(1.0);
    const Source depth = make_source(lwtest::plane_frame(k, Pose::identity(), 0, 1.0));
    InputFrame fa = lwtest::plane_frame(k, Pose::identity(), 0, 1.0 + 0.5 * band);
    InputFrame fb = lwtest::plane_frame(k, Pose::identity(), 0, 1.0 + 0.9 * band);
    Source a = make_source(fa), b = make_source(fb);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            a.features.channels.pixel(x, y)[0] = 0.0f;
            b.features.channels.pixel(x, y)[0] = 1.0f;
        }
    }
    const std::vector<WarpSource> d{depth.view(false)};
    const std::vector<WarpSource> f{a.view(), b.view()};
    const FusionBuffer out = fuse_deferred({Pose::identity(), k}, d, f, m);
    const int cx = 8, cy = 6;
    const std::size_t i = std::size_t(cy) * k.width + cx;
    ASSERT_FALSE(out.hole(i));
    EXPECT_EQ(out.count()[i], 2u);
    const ImageCenter center(k);
    const double w_i = vignetting_weight(center.distance(cx, cy), center.max_dist);
    const double wa = std::pow(0.75 * w_i, 5.0), wb = std::pow(0.19 * w_i, 5.0);
    EXPECT_NEAR(out.feature(i)[0], wb / (wa + wb), 2e-4);
}

TEST(Deferred, DepthOnlySourcesStillShapeDepth) {
    const Intrinsics k = lwtest::make_k(32, 24, 30.0);
    const Source front = make_source(lwtest::plane_frame(k, Pose::identity(), 0, 1.0));
    const Source back = make_source(lwtest::plane_frame(k, Pose::identity(), 0, 3.0));
    const std::vector<WarpSource> d{back.view(false), front.view(false)};
    const std::vector<WarpSource> f{front.view()};
    FusionBuffer stage1;
    Warper warper;
    FusionBuffer out;
    warper.fuse_deferred({Pose::identity(), k}, d, f, {}, out, &stage1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.hole(i)) continue;
        EXPECT_FLOAT_EQ(stage1.depth()[i], 1.0f);
        EXPECT_FLOAT_EQ(out.depth()[i], 1.0f);
    }
    EXPECT_LT(out.hole_count(), out.size() / 10);
}

TEST(Warper, ThreadedMatchesSerialBitForBit) {
    const Intrinsics k = lwtest::make_k(96, 72, 80.0);
    const auto srcs = wavy_sources(k, 3, 32);
    const auto v = views(srcs);
    const WarpTarget target{Pose::from_translation({-0.01, 0.01, 0.02}), k};
    WorkerPool pool(4);
    Warper serial, threaded(&pool);
    FusionBuffer a, b;
    serial.fuse_forward(target, v, {}, a);
    threaded.fuse_forward(target, v, {}, b);
    EXPECT_EQ(std::as_const(a).depth(), std::as_const(b).depth());
    EXPECT_EQ(std::as_const(a).features(), std::as_const(b).features());
    serial.fuse_deferred(target, v, v, {}, a);
    threaded.fuse_deferred(target, v, v, {}, b);
    EXPECT_EQ(std::as_const(a).depth(), std::as_const(b).depth());
    EXPECT_EQ(std::as_const(a).features(), std::as_const(b).features());
}

TEST(Warper, SourceOrderOnlyPerturbsRounding) {
    const Intrinsics k = lwtest::make_k(48, 36, 40.0);
    const auto srcs = wavy_sources(k, 3, 33);
    auto v = views(srcs);
    const WarpTarget target{Pose::identity(), k};
    const FusionBuffer a = fuse_forward(target, v, {});
    std::reverse(v.begin(), v.end());
    const FusionBuffer b = fuse_forward(target, v, {});
    std::size_t differ = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.hole(i) != b.hole(i)) {
            ++differ;
            continue;
        }
        if (a.hole(i) || a.count()[i] != b.count()[i]) continue;
        EXPECT_NEAR(a.depth()[i], b.depth()[i], 1e-5f * a.depth()[i]);
    }
    EXPECT_EQ(differ, 0u);
}
