// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <random>

#include <gtest/gtest.h>

#include "livewarp/metrics.hpp"

using namespace livewarp;

namespace {

FloatImage filled(int w, int h, int c, float v) {
    FloatImage img(w, h, c);
    for (auto& x : img.data()) x = v;
    return img;
}

FloatImage noise(int w, int h, int c, std::mt19937& rng) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    FloatImage img(w, h, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int k = 0; k < c; ++k) img.at(x, y, k) = 0.5f + 0.3f * std::sin(0.3f * x + k) * std::cos(0.2f * y) + 0.1f * u(rng);
        }
    }
    return img;
}

// Per-window SSIM with a 2D Gaussian evaluated directly at each window.
double ssim_oracle(const FloatImage& a, const FloatImage& b) {
    const int win = 11, r = 5;
    const double sigma = 1.5, c1 = 0.0001, c2 = 0.0009;
    double g[11][11], gs = 0.0;
    for (int j = 0; j < win; ++j) {
        for (int i = 0; i < win; ++i) {
            g[j][i] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * sigma * sigma));
            gs += g[j][i];
        }
    }
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double sum = 0.0;
        int count = 0;
        for (int y = 0; y + win <= a.height(); ++y) {
            for (int x = 0; x + win <= a.width(); ++x) {
                double ma = 0, mb = 0;
                for (int j = 0; j < win; ++j) {
                    for (int i = 0; i < win; ++i) {
                        ma += g[j][i] / gs * a.at(x + i, y + j, c);
                        mb += g[j][i] / gs * b.at(x + i, y + j, c);
                    }
                }
                double va = 0, vb = 0, cov = 0;
                for (int j = 0; j < win; ++j) {
                    for (int i = 0; i < win; ++i) {
                        const double da = a.at(x + i, y + j, c) - ma, db = b.at(x + i, y + j, c) - mb;
                        va += g[j][i] / gs * da * da;
                        vb += g[j][i] / gs * db * db;
                        cov += g[j][i] / gs * da * db;
                    }
                }
                sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        }
        total += sum / count;
    }
    return total / a.channels();
}

}  // namespace

TEST(Metrics, IdenticalImages) {
    std::mt19937 rng(61);
    const FloatImage a = noise(24, 20, 3, rng);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    EXPECT_EQ(l1(a, a), 0.0);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Metrics, ZerosAgainstOnes) {
    const FloatImage a = filled(16, 16, 3, 0.0f), b = filled(16, 16, 3, 1.0f);
    EXPECT_NEAR(psnr(a, b), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(l1(a, b), 1.0);
}

TEST(Metrics, HalfGrayIsSixDecibels) {
    const FloatImage a = filled(16, 16, 1, 0.0f), b = filled(16, 16, 1, 0.5f);
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(4.0), 1e-9);
    EXPECT_NEAR(psnr(a, b), 6.0206, 1e-4);
}

TEST(Metrics, SsimMatchesDirectWindows) {
    std::mt19937 rng(62);
    for (int trial = 0; trial < 10; ++trial) {
        const FloatImage a = noise(23, 19, 3, rng);
        const FloatImage b = noise(23, 19, 3, rng);
        EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-9);
    }
}

TEST(Metrics, SizeMismatchThrows) {
    EXPECT_THROW(psnr(filled(4, 4, 3, 0), filled(4, 5, 3, 0)), Error);
    EXPECT_THROW(l1(filled(4, 4, 3, 0), filled(4, 4, 1, 0)), Error);
    EXPECT_THROW(ssim(filled(8, 8, 1, 0), filled(8, 8, 1, 0)), Error);
}

TEST(Metrics, MaskedPsnrIgnoresMaskedPixels) {
    FloatImage a = filled(4, 1, 1, 0.0f), b = filled(4, 1, 1, 0.0f);
    b.at(0, 0) = 1.0f;
    b.at(1, 0) = 0.5f;
    EXPECT_NEAR(masked_psnr(a, b, {0, 1, 1, 1}), 10.0 * std::log10(3.0 / 0.25), 1e-9);
    EXPECT_EQ(masked_psnr(a, b, {0, 0, 1, 1}), kPsnrCap);
}

TEST(Metrics, ColorOverloadsAgree) {
    ColorImage a(12, 12, 3), b(12, 12, 3);
    std::mt19937 rng(63);
    std::uniform_int_distribution<int> px(0, 255);
    for (auto& v : a.data()) v = std::uint8_t(px(rng));
    for (auto& v : b.data()) v = std::uint8_t(px(rng));
    EXPECT_DOUBLE_EQ(psnr(a, b), psnr(to_float(a), to_float(b)));
    EXPECT_DOUBLE_EQ(ssim(a, b), ssim(to_float(a), to_float(b)));
}
