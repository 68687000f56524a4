// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "livewarp/geometry.hpp"
#include "livewarp/image.hpp"
#include "livewarp/png_io.hpp"

namespace livewarp {

/// One RGB-D sample with its pose.
struct InputFrame {
    ColorImage color;  // RGB8
    DepthImage depth;  // meters, 0 = invalid
    double timestamp = 0.0;
    Pose pose;
    Intrinsics intrinsics;

    void validate() const {
        intrinsics.validate();
        if (color.width() != intrinsics.width || color.height() != intrinsics.height ||
            color.channels() != 3) {
            throw Error("frame: color size does not match intrinsics");
        }
        if (depth.width() != intrinsics.width || depth.height() != intrinsics.height ||
            depth.channels() != 1) {
            throw Error("frame: depth size does not match intrinsics");
        }
        for (float d : depth.data()) {
            if (!(d >= 0.0f)) throw Error("frame: negative or NaN depth");
        }
    }
};

struct DatasetFormat {
    double depth_scale = 5000.0;     // depth PNG units per meter
    double max_pose_offset = 0.020;  // seconds between image and trajectory stamps
};

struct TrajectoryEntry {
    double timestamp = 0.0;
    Pose pose;
};

namespace detail {

inline std::string where(const std::filesystem::path& file, std::size_t line) {
    return file.string() + ":" + std::to_string(line);
}

}  // namespace detail

inline Intrinsics read_intrinsics(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw Error("missing intrinsics file " + file.string());
    }
    Intrinsics k;
    if (!(in >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height)) {
        throw Error("malformed intrinsics file " + file.string() +
                    " (expected: fx fy cx cy width height)");
    }
    k.validate();
    return k;
}

inline void write_intrinsics(const std::filesystem::path& file, const Intrinsics& k) {
    std::ofstream out(file);
    out << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' '
        << k.width << ' ' << k.height << '\n';
}

/// Parses `timestamp tx ty tz qx qy qz qw` rows; '#' starts a comment line.
inline std::vector<TrajectoryEntry> parse_trajectory(std::istream& in,
                                                     const std::filesystem::path& name) {
    std::vector<TrajectoryEntry> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        std::vector<double> v;
        std::string tok;
        while (ss >> tok) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw Error(detail::where(name, line_no) + ": malformed trajectory value '" + tok +
                            "'");
            }
        }
        if (v.size() != 8) {
            throw Error(detail::where(name, line_no) + ": expected 8 fields, found " +
                        std::to_string(v.size()));
        }
        const double qn = std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
        if (std::abs(qn - 1.0) > 1e-3) {
            throw Error(detail::where(name, line_no) + ": quaternion is not unit length");
        }
        rows.push_back({v[0], Pose::from_tum(v[1], v[2], v[3], v[4] / qn, v[5] / qn, v[6] / qn,
                                             v[7] / qn)});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return rows;
}

inline std::vector<TrajectoryEntry> read_trajectory(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("missing trajectory file " + file.string());
    return parse_trajectory(in, file);
}

inline std::string format_tum_pose(const Pose& p) {
    const Eigen::Quaterniond q = p.quaternion().normalized();
    std::ostringstream out;
    out << std::setprecision(17) << p.translation.x() << ' ' << p.translation.y() << ' '
        << p.translation.z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w();
    return out.str();
}

/// Index of the row nearest to `t` within `max_offset`, or -1.
inline long nearest_pose(const std::vector<TrajectoryEntry>& rows, double t, double max_offset) {
    auto it = std::lower_bound(rows.begin(), rows.end(), t,
                               [](const TrajectoryEntry& e, double v) { return e.timestamp < v; });
    long best = -1;
    double best_dt = max_offset;
    auto consider = [&](auto i) {
        if (i < rows.begin() || i >= rows.end()) return;
        const double dt = std::abs(i->timestamp - t);
        if (dt <= best_dt) {
            best_dt = dt;
            best = static_cast<long>(i - rows.begin());
        }
    };
    consider(it);
    if (it != rows.begin()) consider(it - 1);
    return best;
}

inline DepthImage depth_from_png(const Image<std::uint16_t>& raw, double scale) {
    DepthImage d(raw.width(), raw.height(), 1);
    auto src = raw.data();
    auto dst = d.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<float>(src[i] / scale);
    }
    return d;
}

inline Image<std::uint16_t> depth_to_png(const DepthImage& depth, double scale) {
    Image<std::uint16_t> raw(depth.width(), depth.height(), 1);
    auto src = depth.data();
    auto dst = raw.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = std::round(src[i] * scale);
        dst[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
    }
    return raw;
}

/// Directory layout:
///   color/<timestamp>.png   8-bit RGB
///   depth/<timestamp>.png   16-bit gray, meters = value / depth_scale
///   trajectory.txt          timestamp tx ty tz qx qy qz qw (camera-to-world)
///   intrinsics.txt          fx fy cx cy width height
///
/// Frames without a trajectory row within `max_pose_offset` are dropped with a
/// warning on std::clog.
inline std::vector<InputFrame> load_stream(const std::filesystem::path& dir,
                                           const DatasetFormat& format = {}) {
    namespace fs = std::filesystem;
    const Intrinsics k = read_intrinsics(dir / "intrinsics.txt");
    const auto trajectory = read_trajectory(dir / "trajectory.txt");
    if (!fs::is_directory(dir / "color") || !fs::is_directory(dir / "depth")) {
        throw Error("dataset " + dir.string() + " lacks color/ or depth/");
    }

    struct Entry {
        double t;
        fs::path color, depth;
    };
    std::vector<Entry> entries;
    for (const auto& f : fs::directory_iterator(dir / "color")) {
        if (f.path().extension() != ".png") continue;
        const std::string stem = f.path().stem().string();
        double t = 0.0;
        try {
            t = std::stod(stem);
        } catch (const std::exception&) {
            throw Error("color image name is not a timestamp: " + f.path().string());
        }
        const fs::path depth = dir / "depth" / f.path().filename();
        if (!fs::exists(depth)) {
            std::clog << "warning: no depth image for " << f.path() << ", skipped\n";
            continue;
        }
        entries.push_back({t, f.path(), depth});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.t < b.t; });

    std::vector<InputFrame> frames;
    frames.reserve(entries.size());
    for (const auto& e : entries) {
        const long row = nearest_pose(trajectory, e.t, format.max_pose_offset);
        if (row < 0) {
            std::clog << "warning: no pose within " << format.max_pose_offset * 1000.0
                      << " ms for " << e.color << ", frame dropped\n";
            continue;
        }
        if (!frames.empty() && !(e.t > frames.back().timestamp)) {
            throw Error("duplicate timestamp " + e.color.string());
        }
        InputFrame f;
        f.timestamp = e.t;
        f.pose = trajectory[row].pose;
        f.intrinsics = k;
        f.color = png::read_rgb8(e.color);
        f.depth = depth_from_png(png::read_gray16(e.depth), format.depth_scale);
        f.validate();
        frames.push_back(std::move(f));
    }
    return frames;
}

inline std::string timestamp_name(double t) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << t;
    return out.str();
}

/// Writes frames in the layout read by load_stream.
inline void write_dataset(const std::filesystem::path& dir, const std::vector<InputFrame>& frames,
                          const DatasetFormat& format = {}) {
    namespace fs = std::filesystem;
    if (frames.empty()) throw Error("write_dataset: no frames");
    fs::create_directories(dir / "color");
    fs::create_directories(dir / "depth");
    write_intrinsics(dir / "intrinsics.txt", frames.front().intrinsics);
    std::ofstream traj(dir / "trajectory.txt");
    traj << "# timestamp tx ty tz qx qy qz qw\n";
    for (const auto& f : frames) {
        const std::string name = timestamp_name(f.timestamp);
        png::write_rgb8(dir / "color" / (name + ".png"), f.color);
        png::write_gray16(dir / "depth" / (name + ".png"), depth_to_png(f.depth, format.depth_scale));
        traj << name << ' ' << format_tum_pose(f.pose) << '\n';
    }
}

}  // namespace livewarp
