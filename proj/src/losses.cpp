#include "meshfit/losses.hpp"

#include "ssim_common.hpp"

#include <cmath>
#include <sstream>

namespace meshfit {

namespace {
int64_t foreground_count(const Image& mask) {
    int64_t n = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x) > 0.5) ++n;
    return n;
}
}  // namespace

double normal_loss(const Image& pred_n, const Image& gt_n, const Image& gt_mask) {
    require_same_shape(pred_n, gt_n, "normal_loss");
    if (gt_mask.height != pred_n.height || gt_mask.width != pred_n.width)
        throw InputError("normal_loss: mask shape mismatch");
    const int64_t fg = foreground_count(gt_mask);
    if (fg == 0) return 0.0;
    double acc = 0;
    for (int y = 0; y < pred_n.height; ++y)
        for (int x = 0; x < pred_n.width; ++x)
            if (gt_mask.at(y, x) > 0.5)
                acc += 1.0 - pred_n.pixel3(y, x).dot(gt_n.pixel3(y, x));
    return acc / static_cast<double>(fg);
}

Image normal_loss_grad(const Image& pred_n, const Image& gt_n, const Image& gt_mask) {
    require_same_shape(pred_n, gt_n, "normal_loss");
    Image grad(pred_n.height, pred_n.width, 3, 0.0);
    const int64_t fg = foreground_count(gt_mask);
    if (fg == 0) return grad;
    const double inv = 1.0 / static_cast<double>(fg);
    for (int y = 0; y < pred_n.height; ++y)
        for (int x = 0; x < pred_n.width; ++x)
            if (gt_mask.at(y, x) > 0.5) grad.set_pixel3(y, x, -inv * gt_n.pixel3(y, x));
    return grad;
}

double depth_loss(const Image& pred_d, const Image& gt_d, const Image& gt_mask) {
    require_same_shape(pred_d, gt_d, "depth_loss");
    const int64_t fg = foreground_count(gt_mask);
    if (fg == 0) return 0.0;
    double acc = 0;
    for (int y = 0; y < pred_d.height; ++y)
        for (int x = 0; x < pred_d.width; ++x)
            if (gt_mask.at(y, x) > 0.5) acc += std::abs(pred_d.at(y, x) - gt_d.at(y, x));
    return acc / static_cast<double>(fg);
}

Image depth_loss_grad(const Image& pred_d, const Image& gt_d, const Image& gt_mask) {
    require_same_shape(pred_d, gt_d, "depth_loss");
    Image grad(pred_d.height, pred_d.width, 1, 0.0);
    const int64_t fg = foreground_count(gt_mask);
    if (fg == 0) return grad;
    const double inv = 1.0 / static_cast<double>(fg);
    for (int y = 0; y < pred_d.height; ++y)
        for (int x = 0; x < pred_d.width; ++x)
            if (gt_mask.at(y, x) > 0.5) {
                const double d = pred_d.at(y, x) - gt_d.at(y, x);
                grad.at(y, x) = d > 0 ? inv : (d < 0 ? -inv : 0.0);
            }
    return grad;
}

double mask_loss(const Image& pred_m, const Image& gt_m) {
    require_same_shape(pred_m, gt_m, "mask_loss");
    double acc = 0;
    for (size_t i = 0; i < pred_m.data.size(); ++i) {
        const double d = pred_m.data[i] - gt_m.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred_m.data.size());
}

Image mask_loss_grad(const Image& pred_m, const Image& gt_m) {
    require_same_shape(pred_m, gt_m, "mask_loss");
    Image grad(pred_m.height, pred_m.width, pred_m.channels, 0.0);
    const double inv = 2.0 / static_cast<double>(pred_m.data.size());
    for (size_t i = 0; i < pred_m.data.size(); ++i)
        grad.data[i] = inv * (pred_m.data[i] - gt_m.data[i]);
    return grad;
}

double image_mse(const Image& pred, const Image& gt) {
    require_same_shape(pred, gt, "mse");
    double acc = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - gt.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.data.size());
}

Image image_mse_grad(const Image& pred, const Image& gt) {
    require_same_shape(pred, gt, "mse");
    Image grad(pred.height, pred.width, pred.channels, 0.0);
    const double inv = 2.0 / static_cast<double>(pred.data.size());
    for (size_t i = 0; i < pred.data.size(); ++i)
        grad.data[i] = inv * (pred.data[i] - gt.data[i]);
    return grad;
}

// ---------------------------------------------------------------------------
// Multi-scale perceptual proxy.
// ---------------------------------------------------------------------------

namespace {
constexpr int kScales = 3;
constexpr double kScaleWeights[kScales] = {0.5, 0.3, 0.2};

void check_proxy_size(const Image& img) {
    int h = img.height, w = img.width;
    for (int s = 1; s < kScales; ++s) {
        h /= 2;
        w /= 2;
    }
    if (h < ssim_detail::kWindow || w < ssim_detail::kWindow)
        throw InputError("perceptual_proxy: image smaller than the coarsest 11x11 window "
                         "(need min dimension >= 44)");
}
}  // namespace

double perceptual_proxy(const Image& pred, const Image& gt) {
    require_same_shape(pred, gt, "perceptual_proxy");
    check_proxy_size(pred);
    Image a = pred, b = gt;
    double sim = 0;
    for (int s = 0; s < kScales; ++s) {
        if (s > 0) {
            a = ssim_detail::downsample2(a);
            b = ssim_detail::downsample2(b);
        }
        // Anti-correlated scales clamp to zero similarity, keeping the
        // proxy in [0, 1].
        sim += kScaleWeights[s] * std::max(0.0, ssim_detail::mean_ssim(a, b));
    }
    return 1.0 - sim;
}

Image perceptual_proxy_grad(const Image& pred, const Image& gt) {
    require_same_shape(pred, gt, "perceptual_proxy");
    check_proxy_size(pred);
    std::vector<Image> pyr_a{pred}, pyr_b{gt};
    for (int s = 1; s < kScales; ++s) {
        pyr_a.push_back(ssim_detail::downsample2(pyr_a.back()));
        pyr_b.push_back(ssim_detail::downsample2(pyr_b.back()));
    }
    // d proxy / d pred = -sum_s w_s d(meanSSIM_s)/d pred, chained through pooling.
    Image grad(pred.height, pred.width, pred.channels, 0.0);
    for (int s = kScales - 1; s >= 0; --s) {
        Image g_scale(pyr_a[s].height, pyr_a[s].width, pyr_a[s].channels, 0.0);
        const double m = ssim_detail::mean_ssim(pyr_a[s], pyr_b[s], &g_scale);
        if (m <= 0.0) continue;  // clamped scale: zero subgradient
        for (auto& v : g_scale.data) v *= -kScaleWeights[s];
        for (int up = s; up > 0; --up) {
            Image fine(pyr_a[up - 1].height, pyr_a[up - 1].width, pyr_a[up - 1].channels, 0.0);
            ssim_detail::downsample2_backprop(g_scale, fine);
            g_scale = std::move(fine);
        }
        for (size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += g_scale.data[i];
    }
    return grad;
}

LossParts rgb_loss(const Image& pred, const Image& gt, const LossOptions& options) {
    LossParts p;
    p.mse = image_mse(pred, gt);
    if (options.include_proxy) p.proxy = perceptual_proxy(pred, gt);
    return p;
}

Image rgb_loss_grad(const Image& pred, const Image& gt, const LossOptions& options) {
    Image grad = image_mse_grad(pred, gt);
    if (options.include_proxy) {
        Image pg = perceptual_proxy_grad(pred, gt);
        for (size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += pg.data[i];
    }
    return grad;
}

LossParts pbr_expectation_loss(std::span<const Image> pred_maps, std::span<const Image> gt_maps,
                               const LossOptions& options) {
    if (pred_maps.size() != gt_maps.size())
        throw InputError("pbr_expectation_loss: condition count mismatch");
    if (pred_maps.empty()) throw InputError("pbr_expectation_loss: no conditions");
    LossParts acc;
    for (size_t i = 0; i < pred_maps.size(); ++i) {
        const LossParts p = rgb_loss(pred_maps[i], gt_maps[i], options);
        acc.mse += p.mse;
        acc.proxy += p.proxy;
    }
    acc.mse /= static_cast<double>(pred_maps.size());
    acc.proxy /= static_cast<double>(pred_maps.size());
    return acc;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

std::string LossReport::to_json_line() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"eik\":" << eik << ",\"sdf\":" << sdf << ",\"spec\":" << spec
       << ",\"diff\":" << diff << ",\"nor\":" << nor << ",\"dep\":" << dep
       << ",\"mask\":" << mask << ",\"rgb\":" << rgb << ",\"perc\":" << perc
       << ",\"total\":" << total << "}";
    return os.str();
}

LossReport geometry_total(const GeometryTerms& terms, const GeometryWeights& weights) {
    LossReport r;
    bool any = false;
    auto add = [&any](std::optional<double> t, double w, double& slot) {
        if (!t) return 0.0;
        any = true;
        slot = *t;
        return w * *t;
    };
    double total = 0;
    total += add(terms.eik, weights.eik, r.eik);
    total += add(terms.sdf, weights.sdf, r.sdf);
    total += add(terms.spec, weights.spec, r.spec);
    total += add(terms.diff, weights.diff, r.diff);
    total += add(terms.nor, weights.nor, r.nor);
    total += add(terms.dep, weights.dep, r.dep);
    total += add(terms.mask, weights.mask, r.mask);
    if (!any) throw InputError("geometry_total: all terms disabled");
    r.total = total;
    return r;
}

}  // namespace meshfit
