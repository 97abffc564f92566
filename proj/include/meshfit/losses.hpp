#pragma once

#include "meshfit/core.hpp"

#include <optional>

namespace meshfit {

// ---------------------------------------------------------------------------
// Supervision terms. All losses are pure, non-negative and zero on identical
// inputs; masked losses normalize by the foreground pixel count and return 0
// when the foreground is empty. The *_grad functions return analytic
// derivatives with respect to the predicted input.
// ---------------------------------------------------------------------------

/// Mean over foreground (gt_mask > 0.5) of 1 - dot(pred, gt).
double normal_loss(const Image& pred_n, const Image& gt_n, const Image& gt_mask);
Image normal_loss_grad(const Image& pred_n, const Image& gt_n, const Image& gt_mask);

/// Mean over foreground of |pred - gt|.
double depth_loss(const Image& pred_d, const Image& gt_d, const Image& gt_mask);
Image depth_loss_grad(const Image& pred_d, const Image& gt_d, const Image& gt_mask);

/// Mean over all pixels of (pred - gt)^2.
double mask_loss(const Image& pred_m, const Image& gt_m);
Image mask_loss_grad(const Image& pred_m, const Image& gt_m);

/// Mean over all pixels and channels of (pred - gt)^2.
double image_mse(const Image& pred, const Image& gt);
Image image_mse_grad(const Image& pred, const Image& gt);

/// 1 - multi-scale structural similarity (3 scales, 11x11 Gaussian windows,
/// scale weights 0.5/0.3/0.2). Zero iff the images are identical; symmetric.
/// Requires min(H, W) >= 44. Stands in for a learned perceptual metric.
double perceptual_proxy(const Image& pred, const Image& gt);
Image perceptual_proxy_grad(const Image& pred, const Image& gt);

struct LossParts {
    double mse = 0.0;
    double proxy = 0.0;
    double total() const { return mse + proxy; }
};

struct LossOptions {
    /// "mse-only" mode drops the perceptual term (and its size requirement).
    bool include_proxy = true;
};

/// Per-pixel MSE plus the perceptual proxy.
LossParts rgb_loss(const Image& pred, const Image& gt, const LossOptions& options = {});
Image rgb_loss_grad(const Image& pred, const Image& gt, const LossOptions& options = {});

/// Mean over matched (environment, material, view) conditions of the
/// rgb-style loss, applied to one light-map stack (specular or diffuse).
LossParts pbr_expectation_loss(std::span<const Image> pred_maps, std::span<const Image> gt_maps,
                               const LossOptions& options = {});

// ---------------------------------------------------------------------------
// Loss report / total geometry loss.
// ---------------------------------------------------------------------------

struct LossReport {
    double eik = 0, sdf = 0, spec = 0, diff = 0, nor = 0, dep = 0, mask = 0;
    double rgb = 0, perc = 0;
    double total = 0;

    std::string to_json_line() const;  // one JSONL record
};

/// Term values; a disengaged term is std::nullopt.
struct GeometryTerms {
    std::optional<double> eik, sdf, spec, diff, nor, dep, mask;
};

struct GeometryWeights {
    double eik = 1, sdf = 1, spec = 1, diff = 1, nor = 1, dep = 1, mask = 1;
};

/// Weighted sum of the enabled geometry terms. Throws if every term is
/// disabled.
LossReport geometry_total(const GeometryTerms& terms, const GeometryWeights& weights = {});

}  // namespace meshfit
