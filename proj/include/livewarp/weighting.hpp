// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "livewarp/geometry.hpp"

namespace livewarp {

/// Sensor depth-error model Delta(d) = 1 / (a d^2 + b d + c), plus the fusion
/// band. The weight term uses Delta directly; the band that separates
/// surfaces is band(d) = band_kappa * d^2, which widens with distance.
/// `strict_paper_mode` uses Delta for the band as well.
struct DepthErrorModel {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
    double band_kappa = 0.01;  // 1/m; 1 cm at 1 m
    bool strict_paper_mode = false;
    double d_min = 0.1;  // validated depth range, meters
    double d_max = 20.0;

    double denominator(double d) const { return (a * d + b) * d + c; }

    /// Throws unless Delta and band are positive over [d_min, d_max].
    void validate() const {
        if (!(d_min > 0.0) || !(d_max > d_min)) {
            throw Error("depth model: invalid depth range");
        }
        double lowest = std::min(denominator(d_min), denominator(d_max));
        if (a != 0.0) {
            const double vertex = -b / (2.0 * a);
            if (vertex > d_min && vertex < d_max) lowest = std::min(lowest, denominator(vertex));
        }
        if (!(lowest > 0.0)) {
            throw Error("depth model: a d^2 + b d + c must be positive over the depth range");
        }
        if (!strict_paper_mode && !(band_kappa > 0.0)) {
            throw Error("depth model: band_kappa must be positive");
        }
    }

    double delta(double d) const {
        const double den = denominator(d);
        if (!(den > 0.0)) throw Error("depth model: non-positive denominator");
        return 1.0 / den;
    }

    /// Hot-path forms; no validation.
    float delta_f(float d) const {
        return 1.0f / ((float(a) * d + float(b)) * d + float(c));
    }
    float band_f(float d) const {
        return strict_paper_mode ? delta_f(d) : float(band_kappa) * d * d;
    }
    double band(double d) const { return strict_paper_mode ? delta(d) : band_kappa * d * d; }

    /// w_d, clamped to [0, 1].
    float depth_weight(float d) const { return std::clamp(delta_f(d), 0.0f, 1.0f); }
};

struct WeightInputs {
    double d_f = 1.0;  // fragment depth, meters
    Eigen::Vector3d v_s = Eigen::Vector3d::UnitZ();  // unit, source camera to point
    Eigen::Vector3d v_t = Eigen::Vector3d::UnitZ();  // unit, target camera to point
    double c_dist = 0.0;  // pixel distance to the source image center
    double c_max = 1.0;   // largest such distance
};

inline float pow5(float x) {
    const float x2 = x * x;
    return x2 * x2 * x;
}

/// Vignetting term 1 - c / c_max.
inline double vignetting_weight(double c_dist, double c_max) {
    return c_max > 0.0 ? std::max(0.0, 1.0 - c_dist / c_max) : 1.0;
}

/// Center and c_max of a source image; pixel centers are integers so the
/// corner pixels sit exactly at c_max.
struct ImageCenter {
    double x = 0.0;
    double y = 0.0;
    double max_dist = 1.0;

    explicit ImageCenter(const Intrinsics& k)
        : x(0.5 * (k.width - 1)), y(0.5 * (k.height - 1)), max_dist(std::hypot(x, y)) {
        if (!(max_dist > 0.0)) max_dist = 1.0;
    }

    double distance(double u, double v) const { return std::hypot(u - x, v - y); }
};

/// w_d * w_v * w_i, before the fifth power.
inline double weight_base(const WeightInputs& in, const DepthErrorModel& model) {
    const double w_d = std::clamp(model.delta(in.d_f), 0.0, 1.0);
    const double w_v = std::max(0.0, in.v_s.dot(in.v_t));
    const double w_i = vignetting_weight(in.c_dist, in.c_max);
    return w_d * w_v * w_i;
}

/// w_f = (w_d w_v w_i)^5.
inline double fragment_weight(const WeightInputs& in, const DepthErrorModel& model) {
    return std::pow(weight_base(in, model), 5.0);
}

}  // namespace livewarp
