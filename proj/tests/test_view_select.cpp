// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "livewarp/view_select.hpp"
#include "test_util.hpp"

using namespace livewarp;

namespace {

ViewSelectConfig small_cfg(int n = 15) {
    ViewSelectConfig c;
    c.num_views = n;
    c.tile_size = 16;
    c.coverage_downsample = 4;
    return c;
}

Pose yaw(double rad, Eigen::Vector3d t = Eigen::Vector3d::Zero()) {
    Pose p = Pose::from_translation(t);
    p.rotation = Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitY()).toRotationMatrix();
    return p;
}

// Full-resolution per-tile sample counts, computed without the library's
// projection helpers.
std::vector<int> oracle_tiles(const InputFrame& f, const Pose& target, const Intrinsics& tk, int ts) {
    const int tx = (tk.width + ts - 1) / ts, ty = (tk.height + ts - 1) / ts;
    std::vector<int> hits(std::size_t(tx * ty), 0);
    const Intrinsics& k = f.intrinsics;
    auto hom = [](const Pose& p) {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = p.rotation;
        m.topRightCorner<3, 1>() = p.translation;
        return m;
    };
    const Eigen::Matrix4d M = hom(target).inverse() * hom(f.pose);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const double d = f.depth.at(x, y);
            if (!(d > 0)) continue;
            const Eigen::Vector4d p((x - k.cx) * d / k.fx, (y - k.cy) * d / k.fy, d, 1.0);
            const Eigen::Vector4d q = M * p;
            if (q.z() <= 0.01) continue;
            const double u = tk.fx * q.x() / q.z() + tk.cx, v = tk.fy * q.y() / q.z() + tk.cy;
            const long ui = std::lround(u), vi = std::lround(v);
            if (ui < 0 || vi < 0 || ui >= tk.width || vi >= tk.height) continue;
            ++hits[std::size_t((vi / ts) * tx + ui / ts)];
        }
    }
    return hits;
}

TileCoverage mask_coverage(KeyframeId id, std::uint32_t mask, std::size_t tiles, float w) {
    TileCoverage c;
    c.id = id;
    c.samples.assign(tiles, 0);
    c.weight.assign(tiles, 0.0f);
    for (std::size_t t = 0; t < tiles; ++t) {
        if (mask >> t & 1u) {
            c.samples[t] = 1;
            c.weight[t] = w;
        }
    }
    return c;
}

std::size_t min_cover_size(const std::vector<std::uint32_t>& masks) {
    std::uint32_t all = 0;
    for (auto m : masks) all |= m;
    std::size_t best = masks.size();
    for (std::uint32_t s = 0; s < (1u << masks.size()); ++s) {
        std::uint32_t u = 0;
        for (std::size_t i = 0; i < masks.size(); ++i) {
            if (s >> i & 1u) u |= masks[i];
        }
        if (u == all) best = std::min<std::size_t>(best, std::size_t(std::popcount(s)));
    }
    return best;
}

}  // namespace

TEST(TileGrid, RoundsUp) {
    const TileGrid g(640, 480, 32);
    EXPECT_EQ(g.tiles_x, 20);
    EXPECT_EQ(g.tiles_y, 15);
    const TileGrid h(100, 50, 32);
    EXPECT_EQ(h.tile_count(), 4u * 2u);
    EXPECT_EQ(h.tile_of(99, 49), 7u);
}

TEST(Coverage, IdentityCoversEveryTile) {
    const Intrinsics k = lwtest::make_k(64, 48, 60.0);
    KeyframeStore store;
    store.insert(lwtest::plane_frame(k, Pose::identity(), 0, 2.0));
    const auto cfg = small_cfg();
    const TileGrid grid(64, 48, 16);
    const TileCoverage c = estimate_coverage(store.snapshot().keyframes()[0], Pose::identity(), k, grid, {}, cfg);
    EXPECT_EQ(c.covered_tiles(), grid.tile_count());
    for (std::size_t t = 0; t < grid.tile_count(); ++t) EXPECT_EQ(c.samples[t], 16u);
}

TEST(Coverage, OppositeViewCoversNothing) {
    const Intrinsics k = lwtest::make_k(64, 48, 60.0);
    KeyframeStore store;
    store.insert(lwtest::plane_frame(k, Pose::identity(), 0, 2.0));
    const TileGrid grid(64, 48, 16);
    const TileCoverage c =
        estimate_coverage(store.snapshot().keyframes()[0], yaw(std::numbers::pi), k, grid, {}, small_cfg());
    EXPECT_EQ(c.covered_tiles(), 0u);
    EXPECT_TRUE(detail::frustum_disjoint(store.snapshot().keyframes()[0], yaw(std::numbers::pi), k, 0.01f));
}

TEST(Coverage, AgreesWithFullResolutionOracle) {
    const Intrinsics k = lwtest::make_k(128, 96, 100.0);
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
        KeyframeStore store;
        const Pose src = yaw(0.4 * u(rng), {0.6 * u(rng), 0.2 * u(rng), 0.3 * u(rng)});
        store.insert(lwtest::make_frame(k, src, 0, [&](int x, int) { return 1.5 + 0.01 * x; },
                                        [](int, int) { return std::array<std::uint8_t, 3>{}; }));
        const Pose target = Pose::identity();
        const TileGrid grid(k.width, k.height, 16);
        const TileCoverage est =
            estimate_coverage(store.snapshot().keyframes()[0], target, k, grid, {}, small_cfg());
        const auto oracle = oracle_tiles(*store.snapshot().keyframes()[0].frame, target, k, 16);
        for (std::size_t t = 0; t < grid.tile_count(); ++t) {
            if (est.covers(t)) EXPECT_GT(oracle[t], 0) << "trial " << trial << " tile " << t;
            // A tile more than half full at full resolution cannot be missed at 1/4.
            if (oracle[t] > 128) EXPECT_TRUE(est.covers(t)) << "trial " << trial << " tile " << t;
        }
    }
}

TEST(Select, IdenticalCandidatesFillBudgetByIdOrder) {
    const Intrinsics k = lwtest::make_k(64, 48, 60.0);
    KeyframeStore store;
    for (int i = 0; i < 20; ++i) store.insert(lwtest::plane_frame(k, Pose::identity(), i, 2.0));
    const ViewSelection sel = select_views(Pose::identity(), k, store.snapshot(), {}, small_cfg(15));
    ASSERT_EQ(sel.ids.size(), 15u);
    for (int i = 0; i < 15; ++i) EXPECT_EQ(sel.ids[std::size_t(i)], i);
    EXPECT_EQ(sel.uncovered_tiles(), 0u);
    EXPECT_EQ(sel.coverage_estimates, 20u);
}

TEST(Select, FewerCandidatesThanBudget) {
    const Intrinsics k = lwtest::make_k(64, 48, 60.0);
    KeyframeStore store;
    store.insert(lwtest::plane_frame(k, Pose::identity(), 0, 2.0));
    store.insert(lwtest::plane_frame(k, yaw(std::numbers::pi), 1, 2.0));
    const ViewSelection sel = select_views(Pose::identity(), k, store.snapshot(), {}, small_cfg(15));
    EXPECT_EQ(sel.ids, (std::vector<KeyframeId>{0}));
    EXPECT_EQ(sel.coverage_estimates, 2u);
}

TEST(Select, HalfViewsPairUp) {
    // Keyframes shifted left and right each see about half the target.
    const Intrinsics k = lwtest::make_k(64, 48, 60.0);
    KeyframeStore store;
    store.insert(lwtest::plane_frame(k, Pose::from_translation({-0.9, 0, 0}), 0, 2.0));
    store.insert(lwtest::plane_frame(k, Pose::from_translation({0.9, 0, 0}), 1, 2.0));
    const ViewSelection two = select_views(Pose::identity(), k, store.snapshot(), {}, small_cfg(2));
    EXPECT_EQ(two.uncovered_tiles(), 0u);
    EXPECT_EQ(std::set<KeyframeId>(two.ids.begin(), two.ids.end()), (std::set<KeyframeId>{0, 1}));
    const ViewSelection one = select_views(Pose::identity(), k, store.snapshot(), {}, small_cfg(1));
    EXPECT_EQ(one.ids.size(), 1u);
    EXPECT_GT(one.uncovered_tiles(), 0u);
}

TEST(Select, CoversWheneverAMinimumCoverFits) {
    std::mt19937 rng(52);
    const std::size_t tiles = 12;
    std::uniform_int_distribution<std::uint32_t> mask(1, (1u << tiles) - 1);
    std::uniform_real_distribution<float> w(0.01f, 1.0f);
    std::uniform_int_distribution<int> count(1, 10), sparsity(0, 2);
    int exact_used = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const int n = count(rng);
        std::vector<std::uint32_t> masks;
        std::vector<TileCoverage> cov;
        for (int i = 0; i < n; ++i) {
            std::uint32_t m = mask(rng);
            for (int s = sparsity(rng); s > 0; --s) m &= mask(rng);
            masks.push_back(m);
            cov.push_back(mask_coverage(KeyframeId(i), m, tiles, w(rng)));
        }
        const std::size_t m = min_cover_size(masks);
        ViewSelectConfig cfg;
        cfg.num_views = std::max(1, int(m));
        const ViewSelection sel = select_from_coverage(cov, tiles, cfg);
        std::uint32_t all = 0, got = 0;
        for (auto x : masks) all |= x;
        for (KeyframeId id : sel.ids) got |= masks[std::size_t(id)];
        ASSERT_EQ(got, all) << "trial " << trial;
        ASSERT_LE(sel.ids.size(), m);
        exact_used += sel.exact_cover_used;
    }
    EXPECT_GT(exact_used, 0);
}

TEST(Select, OneEstimatePerCandidate) {
    const Intrinsics k = lwtest::make_k(64, 48, 60.0);
    KeyframeStore store;
    for (int i = 0; i < 9; ++i) store.insert(lwtest::plane_frame(k, yaw(0.7 * i), i, 2.0));
    const ViewSelection sel = select_views(Pose::identity(), k, store.snapshot(), {}, small_cfg(3));
    EXPECT_EQ(sel.coverage_estimates, 9u);
}

TEST(Select, DeterministicAcrossThreads) {
    const Intrinsics k = lwtest::make_k(96, 72, 80.0);
    KeyframeStore store;
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 24; ++i) {
        store.insert(lwtest::plane_frame(k, yaw(0.6 * u(rng), {0.5 * u(rng), 0.1 * u(rng), 0.3 * u(rng)}), i,
                                         1.5 + u(rng) * 0.5));
    }
    const auto cfg = small_cfg(5);
    const ViewSelection a = select_views(Pose::identity(), k, store.snapshot(), {}, cfg);
    const ViewSelection b = select_views(Pose::identity(), k, store.snapshot(), {}, cfg);
    WorkerPool pool(4);
    const ViewSelection c = select_views(Pose::identity(), k, store.snapshot(), {}, cfg, &pool);
    EXPECT_EQ(a.ids, b.ids);
    EXPECT_EQ(a.ids, c.ids);
    EXPECT_EQ(a.tile_owner, c.tile_owner);
    EXPECT_EQ(a.ids.size(), 5u);
}

TEST(Select, RejectsZeroBudget) {
    ViewSelectConfig cfg;
    cfg.num_views = 0;
    EXPECT_THROW(select_from_coverage({}, 4, cfg), Error);
}

TEST(Select, OwnerHasBestTileWeight) {
    std::vector<TileCoverage> cov{mask_coverage(0, 0b0011, 4, 0.2f), mask_coverage(1, 0b0110, 4, 0.9f),
                                  mask_coverage(2, 0b1000, 4, 0.5f)};
    ViewSelectConfig cfg;
    cfg.num_views = 3;
    const ViewSelection sel = select_from_coverage(cov, 4, cfg);
    EXPECT_EQ(sel.tile_owner, (std::vector<KeyframeId>{0, 1, 1, 2}));
    EXPECT_EQ(sel.ids, (std::vector<KeyframeId>{1, 2, 0}));
}
