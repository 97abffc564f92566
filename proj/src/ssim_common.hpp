#pragma once

// Shared Gaussian-window SSIM core used by the image metrics and the
// multi-scale perceptual term. 11x11 window, sigma 1.5, K1=0.01, K2=0.03,
// dynamic range 1; windows fully inside the image ("valid" mode).

#include "meshfit/core.hpp"

namespace meshfit::ssim_detail {

inline constexpr int kWindow = 11;
inline constexpr double kSigma = 1.5;
inline constexpr double kC1 = 0.01 * 0.01;
inline constexpr double kC2 = 0.03 * 0.03;

inline const std::array<double, kWindow * kWindow>& gaussian_window() {
    static const auto win = [] {
        std::array<double, kWindow * kWindow> w{};
        const int half = kWindow / 2;
        double sum = 0;
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
                const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
                w[(dy + half) * kWindow + (dx + half)] = g;
                sum += g;
            }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return win;
}

/// Mean SSIM over all valid window positions and channels. When grad_a is
/// non-null, accumulates d(mean SSIM)/d a into it (same shape as a).
inline double mean_ssim(const Image& a, const Image& b, Image* grad_a = nullptr) {
    if (!a.same_shape(b)) throw InputError("ssim: image shape mismatch");
    if (a.height < kWindow || a.width < kWindow)
        throw InputError("ssim: image smaller than the 11x11 window");
    const auto& win = gaussian_window();
    const int ny = a.height - kWindow + 1;
    const int nx = a.width - kWindow + 1;
    const double inv_count = 1.0 / (static_cast<double>(ny) * nx * a.channels);

    double total = 0;
    for (int c = 0; c < a.channels; ++c) {
        for (int wy = 0; wy < ny; ++wy) {
            for (int wx = 0; wx < nx; ++wx) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int dy = 0; dy < kWindow; ++dy) {
                    for (int dx = 0; dx < kWindow; ++dx) {
                        const double w = win[dy * kWindow + dx];
                        const double pa = a.at(wy + dy, wx + dx, c);
                        const double pb = b.at(wy + dy, wx + dx, c);
                        mu_a += w * pa;
                        mu_b += w * pb;
                        aa += w * pa * pa;
                        bb += w * pb * pb;
                        ab += w * pa * pb;
                    }
                }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                const double a1 = 2 * mu_a * mu_b + kC1;
                const double a2 = 2 * cov + kC2;
                const double b1 = mu_a * mu_a + mu_b * mu_b + kC1;
                const double b2 = var_a + var_b + kC2;
                const double s = (a1 * a2) / (b1 * b2);
                total += s;
                if (grad_a) {
                    const double ds_dmu = 2 * mu_b * a2 / (b1 * b2) -
                                          a1 * a2 * 2 * mu_a / (b1 * b1 * b2);
                    const double ds_dvar = -a1 * a2 / (b1 * b2 * b2);
                    const double ds_dcov = 2 * a1 / (b1 * b2);
                    for (int dy = 0; dy < kWindow; ++dy) {
                        for (int dx = 0; dx < kWindow; ++dx) {
                            const double w = win[dy * kWindow + dx];
                            const double pa = a.at(wy + dy, wx + dx, c);
                            const double pb = b.at(wy + dy, wx + dx, c);
                            grad_a->at(wy + dy, wx + dx, c) +=
                                inv_count * (ds_dmu * w + ds_dvar * (2 * pa - 2 * mu_a) * w +
                                             ds_dcov * (pb - mu_b) * w);
                        }
                    }
                }
            }
        }
    }
    return total * inv_count;
}

/// 2x2 average pooling (floor semantics: trailing odd row/column dropped).
inline Image downsample2(const Image& img) {
    Image out(img.height / 2, img.width / 2, img.channels, 0.0);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = 0.25 * (img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) +
                                          img.at(2 * y + 1, 2 * x, c) +
                                          img.at(2 * y + 1, 2 * x + 1, c));
    return out;
}

/// Adjoint of downsample2: spreads coarse adjoints back to the fine grid.
inline void downsample2_backprop(const Image& coarse_bar, Image& fine_bar) {
    for (int y = 0; y < coarse_bar.height; ++y)
        for (int x = 0; x < coarse_bar.width; ++x)
            for (int c = 0; c < coarse_bar.channels; ++c) {
                const double g = 0.25 * coarse_bar.at(y, x, c);
                fine_bar.at(2 * y, 2 * x, c) += g;
                fine_bar.at(2 * y, 2 * x + 1, c) += g;
                fine_bar.at(2 * y + 1, 2 * x, c) += g;
                fine_bar.at(2 * y + 1, 2 * x + 1, c) += g;
            }
}

}  // namespace meshfit::ssim_detail
