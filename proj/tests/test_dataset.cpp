// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "livewarp/dataset.hpp"
#include "test_util.hpp"

using namespace livewarp;
namespace fs = std::filesystem;

namespace {

std::vector<InputFrame> three_frames() {
    const Intrinsics k = lwtest::make_k(8, 6, 10.0);
    std::vector<InputFrame> frames;
    for (int i = 0; i < 3; ++i) {
        frames.push_back(lwtest::plane_frame(k, Pose::from_translation({0.1 * i, 0, 0}), 1.0 + i / 30.0,
                                             1.0 + 0.5 * i));
    }
    return frames;
}

}  // namespace

TEST(Trajectory, ParsesRowsAndComments) {
    std::istringstream in("# header\n\n1.0 1 2 3 0 0 0 1\n0.5 0 0 0 0 0 0 1\n");
    const auto rows = parse_trajectory(in, "t.txt");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_DOUBLE_EQ(rows[0].timestamp, 0.5);
    EXPECT_EQ(rows[1].pose.translation, Eigen::Vector3d(1, 2, 3));
}

TEST(Trajectory, SevenFieldsNamesLine) {
    std::istringstream in("# header\n1.0 0 0 0 0 0 0 1\n2.0 0 0 0 0 0 1\n");
    try {
        parse_trajectory(in, "traj.txt");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("traj.txt:3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("expected 8 fields, found 7"), std::string::npos) << msg;
    }
}

TEST(Trajectory, RejectsGarbageAndNonUnitQuaternion) {
    std::istringstream bad_value("1.0 0 0 x 0 0 0 1\n");
    EXPECT_THROW(parse_trajectory(bad_value, "a"), Error);
    std::istringstream bad_quat("1.0 0 0 0 0 0 0 2\n");
    EXPECT_THROW(parse_trajectory(bad_quat, "a"), Error);
}

TEST(Trajectory, NearestPoseWithinOffset) {
    std::vector<TrajectoryEntry> rows{{1.0, {}}, {1.1, {}}, {1.2, {}}};
    EXPECT_EQ(nearest_pose(rows, 1.09, 0.02), 1);
    EXPECT_EQ(nearest_pose(rows, 1.15, 0.02), -1);
    EXPECT_EQ(nearest_pose(rows, 0.99, 0.02), 0);
    EXPECT_EQ(nearest_pose(rows, 1.5, 0.02), -1);
}

TEST(Depth, ScaleFactor) {
    Image<std::uint16_t> raw(2, 1, 1);
    raw.at(0, 0) = 5000;
    raw.at(1, 0) = 0;
    const DepthImage d = depth_from_png(raw, 5000.0);
    EXPECT_FLOAT_EQ(d.at(0, 0), 1.0f);
    EXPECT_FLOAT_EQ(d.at(1, 0), 0.0f);
    EXPECT_EQ(depth_to_png(d, 5000.0), raw);
}

TEST(LoadStream, ThreePairsRoundTrip) {
    lwtest::TempDir dir("ds");
    const auto frames = three_frames();
    write_dataset(dir.path, frames);
    const auto loaded = load_stream(dir.path);
    ASSERT_EQ(loaded.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(loaded[i].timestamp, frames[i].timestamp, 1e-6);
        EXPECT_EQ(loaded[i].color, frames[i].color);
        EXPECT_EQ(loaded[i].intrinsics.width, 8);
        EXPECT_NEAR(loaded[i].intrinsics.fx, 10.0, 1e-12);
        EXPECT_NEAR(loaded[i].depth.at(3, 3), frames[i].depth.at(3, 3), 1e-4);
        EXPECT_NEAR((loaded[i].pose.translation - frames[i].pose.translation).norm(), 0.0, 1e-9);
    }
}

TEST(LoadStream, DropsFramesWithoutPose) {
    lwtest::TempDir dir("ds");
    write_dataset(dir.path, three_frames());
    // Keep only the first trajectory row.
    std::ifstream in(dir.path / "trajectory.txt");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    in.close();
    std::ofstream(dir.path / "trajectory.txt") << first << '\n';
    const auto loaded = load_stream(dir.path);
    EXPECT_EQ(loaded.size(), 1u);
}

TEST(LoadStream, MissingIntrinsics) {
    lwtest::TempDir dir("ds");
    write_dataset(dir.path, three_frames());
    fs::remove(dir.path / "intrinsics.txt");
    try {
        load_stream(dir.path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("missing intrinsics"), std::string::npos) << e.what();
    }
}

TEST(LoadStream, UnreadableImage) {
    lwtest::TempDir dir("ds");
    const auto frames = three_frames();
    write_dataset(dir.path, frames);
    std::ofstream(dir.path / "color" / (timestamp_name(frames[1].timestamp) + ".png")) << "not a png";
    try {
        load_stream(dir.path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("unreadable image"), std::string::npos) << e.what();
    }
}

TEST(LoadStream, MalformedTrajectoryNamesFile) {
    lwtest::TempDir dir("ds");
    write_dataset(dir.path, three_frames());
    std::ofstream(dir.path / "trajectory.txt", std::ios::app) << "9.0 1 2 3\n";
    try {
        load_stream(dir.path);
        FAIL();
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("trajectory.txt:5"), std::string::npos) << msg;
    }
}

TEST(Frame, ValidateCatchesMismatch) {
    auto f = three_frames()[0];
    EXPECT_NO_THROW(f.validate());
    f.depth = DepthImage(3, 3, 1);
    EXPECT_THROW(f.validate(), Error);
}
