// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "livewarp/image.hpp"

namespace livewarp {

inline constexpr double kPsnrCap = 99.0;

namespace detail {

inline void require_same_shape(const FloatImage& a, const FloatImage& b, const char* what) {
    if (!a.same_shape(b)) throw Error(std::string(what) + ": size mismatch");
}

}  // namespace detail

/// Mean squared error over all channels; images in [0,1].
inline double mse(const FloatImage& a, const FloatImage& b) {
    detail::require_same_shape(a, b, "mse");
    auto x = a.data();
    auto y = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = double(x[i]) - double(y[i]);
        s += d * d;
    }
    return x.empty() ? 0.0 : s / double(x.size());
}

inline double psnr(const FloatImage& a, const FloatImage& b) {
    const double e = mse(a, b);
    if (e <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

inline double l1(const FloatImage& a, const FloatImage& b) {
    detail::require_same_shape(a, b, "l1");
    auto x = a.data();
    auto y = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(double(x[i]) - double(y[i]));
    return x.empty() ? 0.0 : s / double(x.size());
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double range = 1.0;
};

/// Mean SSIM over all fully-contained windows and all channels, using a
/// separable Gaussian window.
inline double ssim(const FloatImage& a, const FloatImage& b, const SsimParams& p = {}) {
    detail::require_same_shape(a, b, "ssim");
    const int w = a.width(), h = a.height(), ch = a.channels();
    if (w < p.window || h < p.window) throw Error("ssim: image smaller than the window");

    std::vector<double> g(static_cast<std::size_t>(p.window));
    const int r = p.window / 2;
    double gs = 0.0;
    for (int i = 0; i < p.window; ++i) {
        g[i] = std::exp(-double((i - r) * (i - r)) / (2.0 * p.sigma * p.sigma));
        gs += g[i];
    }
    for (auto& v : g) v /= gs;

    const double c1 = (p.k1 * p.range) * (p.k1 * p.range);
    const double c2 = (p.k2 * p.range) * (p.k2 * p.range);
    const int ow = w - p.window + 1, oh = h - p.window + 1;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::array<std::vector<double>, 5> src, tmp;
    for (auto& v : src) v.resize(n);
    for (auto& v : tmp) v.resize(static_cast<std::size_t>(ow) * h);

    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double va = a.at(x, y, c), vb = b.at(x, y, c);
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                src[0][i] = va;
                src[1][i] = vb;
                src[2][i] = va * va;
                src[3][i] = vb * vb;
                src[4][i] = va * vb;
            }
        }
        for (int k = 0; k < 5; ++k) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < ow; ++x) {
                    double s = 0.0;
                    for (int j = 0; j < p.window; ++j) s += g[j] * src[k][std::size_t(y) * w + x + j];
                    tmp[k][std::size_t(y) * ow + x] = s;
                }
            }
        }
        double sum = 0.0;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                std::array<double, 5> m{};
                for (int k = 0; k < 5; ++k) {
                    double s = 0.0;
                    for (int j = 0; j < p.window; ++j) s += g[j] * tmp[k][std::size_t(y + j) * ow + x];
                    m[k] = s;
                }
                const double mu_a = m[0], mu_b = m[1];
                const double var_a = m[2] - mu_a * mu_a;
                const double var_b = m[3] - mu_b * mu_b;
                const double cov = m[4] - mu_a * mu_b;
                sum += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            }
        }
        total += sum / (double(ow) * oh);
    }
    return total / ch;
}

inline double psnr(const ColorImage& a, const ColorImage& b) { return psnr(to_float(a), to_float(b)); }
inline double l1(const ColorImage& a, const ColorImage& b) { return l1(to_float(a), to_float(b)); }
inline double ssim(const ColorImage& a, const ColorImage& b) { return ssim(to_float(a), to_float(b)); }

/// PSNR restricted to pixels where mask is non-zero.
inline double masked_psnr(const FloatImage& a, const FloatImage& b, const std::vector<std::uint8_t>& mask) {
    detail::require_same_shape(a, b, "masked_psnr");
    if (mask.size() != a.pixel_count()) throw Error("masked_psnr: mask size mismatch");
    double s = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (!mask[std::size_t(y) * a.width() + x]) continue;
            for (int c = 0; c < a.channels(); ++c) {
                const double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
                s += d * d;
                ++n;
            }
        }
    }
    if (n == 0 || s <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(double(n) / s));
}

}  // namespace livewarp
