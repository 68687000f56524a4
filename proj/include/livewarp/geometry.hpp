// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace livewarp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Point3 = Eigen::Vector3d;

/// Pinhole intrinsics. Pixel centers sit on integer coordinates.
struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0)) {
            throw Error("intrinsics: focal lengths must be positive");
        }
        if (width <= 0 || height <= 0) {
            throw Error("intrinsics: image size must be positive");
        }
        if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
            throw Error("intrinsics: principal point outside the image");
        }
    }

    /// Same field of view at a different resolution.
    Intrinsics scaled_to(int new_width, int new_height) const {
        const double sx = static_cast<double>(new_width) / width;
        const double sy = static_cast<double>(new_height) / height;
        Intrinsics k;
        k.fx = fx * sx;
        k.fy = fy * sy;
        k.cx = (cx + 0.5) * sx - 0.5;
        k.cy = (cy + 0.5) * sy - 0.5;
        k.width = new_width;
        k.height = new_height;
        return k;
    }

    bool operator==(const Intrinsics&) const = default;
};

/// Rigid transform stored camera-to-world: x_world = rotation * x_cam + translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose identity() { return {}; }

    static Pose from_translation(const Eigen::Vector3d& t) {
        Pose p;
        p.translation = t;
        return p;
    }

    /// From a TUM-style row (tx ty tz qx qy qz qw). The quaternion must be
    /// normalized by the caller.
    static Pose from_tum(double tx, double ty, double tz,
                         double qx, double qy, double qz, double qw) {
        Pose p;
        p.rotation = Eigen::Quaterniond(qw, qx, qy, qz).toRotationMatrix();
        p.translation = {tx, ty, tz};
        return p;
    }

    Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation); }

    const Eigen::Vector3d& center() const { return translation; }

    Point3 transform(const Point3& p) const { return rotation * p + translation; }

    Pose inverse() const {
        Pose inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    /// (this * other)(x) == this(other(x)).
    Pose operator*(const Pose& other) const {
        Pose out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }

    bool is_valid(double tol = 1e-6) const {
        const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
        return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol &&
               translation.allFinite();
    }

    bool operator==(const Pose& o) const {
        return rotation == o.rotation && translation == o.translation;
    }
};

/// Continuous pixel position plus linear depth (camera z, meters).
struct Pixel {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

inline Pixel project(const Point3& p, const Intrinsics& k) {
    if (!(p.z() > 0.0)) {
        throw Error("project: point is behind camera");
    }
    return {k.fx * (p.x() / p.z()) + k.cx, k.fy * (p.y() / p.z()) + k.cy, p.z()};
}

inline Point3 unproject(const Pixel& px, const Intrinsics& k) {
    if (!(px.depth > 0.0)) {
        throw Error("unproject: invalid depth");
    }
    return {(px.u - k.cx) / k.fx * px.depth, (px.v - k.cy) / k.fy * px.depth, px.depth};
}

/// Transform taking points in a's camera space to b's camera space.
inline Pose relative_pose(const Pose& a, const Pose& b) { return b.inverse() * a; }

/// Unit vector from the camera center toward the surface point.
inline Eigen::Vector3d view_direction(const Point3& p_world, const Point3& camera_center) {
    const Eigen::Vector3d d = p_world - camera_center;
    const double n = d.norm();
    if (!(n > 0.0)) {
        throw Error("view_direction: degenerate direction");
    }
    return d / n;
}

/// Camera-to-world pose of a camera at `eye` looking at `target`, with image
/// y pointing along `down` as closely as possible.
inline Pose look_at(const Point3& eye, const Point3& target,
                    const Eigen::Vector3d& down = Eigen::Vector3d::UnitY()) {
    const Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d x = down.cross(z);
    if (x.norm() < 1e-9) {
        x = Eigen::Vector3d::UnitX().cross(z);
    }
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    Pose p;
    p.rotation.col(0) = x;
    p.rotation.col(1) = y;
    p.rotation.col(2) = z;
    p.translation = eye;
    return p;
}

/// Shortest-arc interpolation between two poses.
inline Pose interpolate(const Pose& a, const Pose& b, double t) {
    const Eigen::Quaterniond q = a.quaternion().slerp(t, b.quaternion()).normalized();
    Pose p;
    p.rotation = q.toRotationMatrix();
    p.translation = (1.0 - t) * a.translation + t * b.translation;
    return p;
}

}  // namespace livewarp
