#include "doctest.h"

#include "meshfit/field.hpp"
#include "meshfit/isosurface.hpp"
#include "meshfit/losses.hpp"
#include "meshfit/raster.hpp"
#include "meshfit/shading.hpp"

#include <cmath>

using namespace meshfit;

namespace {

Image random_image(int h, int w, int c, uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Image img(h, w, c, 0.0);
    Rng rng(seed);
    for (auto& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

Image random_normal_map(int h, int w, uint64_t seed) {
    Image img(h, w, 3, 0.0);
    Rng rng(seed);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.set_pixel3(y, x, rng.normal3().normalized());
    return img;
}

Image full_mask(int h, int w) { return Image(h, w, 1, 1.0); }

// Central finite differences of a scalar functional over image pixels.
template <typename F>
void check_grad_vs_fd(const Image& grad, Image pred, F loss, int probes, uint64_t seed,
                      double tol) {
    Rng rng(seed);
    const double h = 1e-6;
    for (int i = 0; i < probes; ++i) {
        const size_t idx = rng.below(pred.data.size());
        const double keep = pred.data[idx];
        pred.data[idx] = keep + h;
        const double up = loss(pred);
        pred.data[idx] = keep - h;
        const double dn = loss(pred);
        pred.data[idx] = keep;
        const double fd = (up - dn) / (2 * h);
        CHECK(grad.data[idx] == doctest::Approx(fd).epsilon(tol));
    }
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("normal_loss: identical, orthogonal, opposite") {
    Image n1(4, 4, 3, 0.0), n2(4, 4, 3, 0.0), n3(4, 4, 3, 0.0);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            n1.set_pixel3(y, x, Vec3(0, 0, 1));
            n2.set_pixel3(y, x, Vec3(0, 1, 0));
            n3.set_pixel3(y, x, Vec3(0, 0, -1));
        }
    const Image m = full_mask(4, 4);
    CHECK(normal_loss(n1, n1, m) == doctest::Approx(0.0));
    CHECK(normal_loss(n2, n1, m) == doctest::Approx(1.0));
    CHECK(normal_loss(n3, n1, m) == doctest::Approx(2.0));
    Image empty_mask(4, 4, 1, 0.0);
    CHECK(normal_loss(n2, n1, empty_mask) == 0.0);
}

TEST_CASE("normal_loss ignores background exactly") {
    const Image gt = random_normal_map(8, 8, 3);
    Image mask(8, 8, 1, 0.0);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) mask.at(y, x) = 1.0;
    Image pred = random_normal_map(8, 8, 5);
    const double base = normal_loss(pred, gt, mask);
    Rng rng(7);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (mask.at(y, x) < 0.5) pred.set_pixel3(y, x, rng.normal3());
    CHECK(normal_loss(pred, gt, mask) == base);
}

TEST_CASE("depth_loss: identical, offset, empty mask") {
    const Image d = random_image(6, 6, 1, 11, 0.5, 3.0);
    Image d2 = d;
    for (auto& v : d2.data) v += 0.5;
    const Image m = full_mask(6, 6);
    CHECK(depth_loss(d, d, m) == 0.0);
    CHECK(depth_loss(d2, d, m) == doctest::Approx(0.5));
    CHECK(depth_loss(d2, d, Image(6, 6, 1, 0.0)) == 0.0);
}

TEST_CASE("mask_loss: identical, complementary, offset") {
    Image a(5, 5, 1, 0.0), b(5, 5, 1, 1.0);
    CHECK(mask_loss(a, a) == 0.0);
    CHECK(mask_loss(a, b) == doctest::Approx(1.0));
    Image c = random_image(5, 5, 1, 13, 0.1, 0.8);
    Image d = c;
    for (auto& v : d.data) v += 0.1;
    CHECK(mask_loss(d, c) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("loss input-gradients match finite differences at 100 random pixels") {
    const int probes = 100;
    const Image gt_n = random_normal_map(12, 12, 17);
    const Image pred_n = random_normal_map(12, 12, 19);
    Image mask(12, 12, 1, 0.0);
    Rng mrng(23);
    for (auto& v : mask.data) v = mrng.uniform() < 0.7 ? 1.0 : 0.0;

    check_grad_vs_fd(normal_loss_grad(pred_n, gt_n, mask), pred_n,
                     [&](const Image& p) { return normal_loss(p, gt_n, mask); }, probes, 29,
                     1e-5);

    const Image gt_d = random_image(12, 12, 1, 31, 0.5, 2.0);
    const Image pred_d = random_image(12, 12, 1, 37, 0.5, 2.0);
    check_grad_vs_fd(depth_loss_grad(pred_d, gt_d, mask), pred_d,
                     [&](const Image& p) { return depth_loss(p, gt_d, mask); }, probes, 41,
                     1e-5);

    const Image gt_m = random_image(12, 12, 1, 43);
    const Image pred_m = random_image(12, 12, 1, 47);
    check_grad_vs_fd(mask_loss_grad(pred_m, gt_m), pred_m,
                     [&](const Image& p) { return mask_loss(p, gt_m); }, probes, 53, 1e-5);

    const Image gt_i = random_image(10, 10, 3, 59);
    const Image pred_i = random_image(10, 10, 3, 61);
    check_grad_vs_fd(image_mse_grad(pred_i, gt_i), pred_i,
                     [&](const Image& p) { return image_mse(p, gt_i); }, probes, 67, 1e-5);
}

TEST_CASE("perceptual_proxy: identity, negation, structure sensitivity, size guard") {
    const Image img = random_image(48, 48, 3, 71);
    CHECK(perceptual_proxy(img, img) == doctest::Approx(0.0));

    Image neg = img;
    for (auto& v : neg.data) v = 1.0 - v;
    const double pn = perceptual_proxy(img, neg);
    CHECK(pn > 0.0);
    CHECK(pn <= 1.0 + 1e-9);

    // Constant shift preserves structure; block-scrambling destroys it.
    Image shifted = img;
    for (auto& v : shifted.data) v = std::clamp(v + 0.08, 0.0, 1.0);
    Image scrambled = img;
    Rng rng(73);
    for (int rep = 0; rep < 400; ++rep) {
        const int y1 = static_cast<int>(rng.below(42)), x1 = static_cast<int>(rng.below(42));
        const int y2 = static_cast<int>(rng.below(42)), x2 = static_cast<int>(rng.below(42));
        for (int dy = 0; dy < 6; ++dy)
            for (int dx = 0; dx < 6; ++dx)
                for (int c = 0; c < 3; ++c)
                    std::swap(scrambled.at(y1 + dy, x1 + dx, c),
                              scrambled.at(y2 + dy, x2 + dx, c));
    }
    CHECK(perceptual_proxy(scrambled, img) > perceptual_proxy(shifted, img));

    const Image tiny = random_image(20, 20, 3, 79);
    CHECK_THROWS_AS(perceptual_proxy(tiny, tiny), InputError);
}

TEST_CASE("perceptual_proxy gradient matches finite differences") {
    const Image gt = random_image(48, 48, 1, 83);
    const Image pred = random_image(48, 48, 1, 89);
    const Image grad = perceptual_proxy_grad(pred, gt);
    check_grad_vs_fd(grad, pred, [&](const Image& p) { return perceptual_proxy(p, gt); }, 40, 97,
                     1e-4);
}

TEST_CASE("rgb_loss: identical, shifted, scalar-loop oracle") {
    const Image gt = random_image(48, 48, 3, 101);
    CHECK(rgb_loss(gt, gt).total() == doctest::Approx(0.0));

    Image shifted = gt;
    for (auto& v : shifted.data) v += 0.1;  // out-of-range is fine for the loss
    const LossParts parts = rgb_loss(shifted, gt);
    CHECK(parts.mse == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(parts.proxy >= 0.0);

    const Image pred = random_image(48, 48, 3, 103);
    double acc = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - gt.data[i];
        acc += d * d;
    }
    CHECK(rgb_loss(pred, gt, {false}).mse ==
          doctest::Approx(acc / pred.data.size()).epsilon(1e-12));

    const Image grad = rgb_loss_grad(pred, gt);
    check_grad_vs_fd(grad, pred,
                     [&](const Image& p) { return rgb_loss(p, gt).total(); }, 40, 107, 1e-4);
}

TEST_CASE("pbr_expectation_loss: identical stacks, one shifted condition, jittered sphere") {
    std::vector<Image> gt = {random_image(16, 16, 3, 109, 0, 2), random_image(16, 16, 3, 113, 0, 2)};
    std::vector<Image> pred = gt;
    const LossOptions mse_only{false};
    CHECK(pbr_expectation_loss(pred, gt, mse_only).total() == doctest::Approx(0.0));

    for (auto& v : pred[1].data) v += 0.1;
    CHECK(pbr_expectation_loss(pred, gt, mse_only).mse == doctest::Approx(0.005).epsilon(1e-9));

    std::vector<Image> short_stack = {gt[0]};
    CHECK_THROWS_AS(pbr_expectation_loss(short_stack, gt, mse_only), InputError);

    // Rendered check: jittering the mesh strictly increases the loss.
    const SdfGrid g = bake_analytic_grid(AnalyticShape::parse("sphere:0.5"), 24);
    ExtractResult er = extract_mesh(g);
    compute_vertex_normals(er.mesh);
    Mesh jittered = er.mesh;
    Rng rng(127);
    for (auto& v : jittered.vertices) v += 0.01 * rng.normal3();
    compute_vertex_normals(jittered);
    const Camera cam = Camera::look_at(Vec3(0, 0.5, 2.2), Vec3::Zero(), Vec3(0, 1, 0),
                                       deg_to_rad(40), 64, 64);
    const GBuffer gb_gt = rasterize_gbuffer(er.mesh, cam);
    const GBuffer gb_j = rasterize_gbuffer(jittered, cam);
    const EnvironmentMap env = EnvironmentMap::procedural(5, 16);
    ShadingOptions opt;
    opt.samples = 16;
    const Material mat = Material::clamped(0.3, 0.4);
    std::vector<Image> stack_gt = {render_diffuse(gb_gt, env, mat, 3, opt)};
    std::vector<Image> stack_j = {render_diffuse(gb_j, env, mat, 3, opt)};
    CHECK(pbr_expectation_loss(stack_j, stack_gt, mse_only).total() > 0.0);
}

TEST_CASE("geometry_total: zeros, single term, random sum, weights, all-disabled") {
    GeometryTerms t;
    t.eik = t.sdf = t.spec = t.diff = t.nor = t.dep = t.mask = 0.0;
    CHECK(geometry_total(t).total == 0.0);

    GeometryTerms only_eik;
    only_eik.eik = 1.0;
    CHECK(geometry_total(only_eik).total == doctest::Approx(1.0));

    Rng rng(131);
    GeometryTerms r;
    r.eik = rng.uniform();
    r.sdf = rng.uniform();
    r.spec = rng.uniform();
    r.diff = rng.uniform();
    r.nor = rng.uniform();
    r.dep = rng.uniform();
    r.mask = rng.uniform();
    const double expect = *r.eik + *r.sdf + *r.spec + *r.diff + *r.nor + *r.dep + *r.mask;
    CHECK(geometry_total(r).total == doctest::Approx(expect).epsilon(1e-12));

    GeometryWeights w;
    w.sdf = 2.0;
    const double with_w = geometry_total(r, w).total;
    CHECK(with_w - geometry_total(r).total == doctest::Approx(*r.sdf).epsilon(1e-9));

    GeometryTerms none;
    CHECK_THROWS_AS(geometry_total(none), InputError);
}

TEST_CASE("loss report serializes one JSON line") {
    LossReport r;
    r.eik = 0.5;
    r.total = 0.5;
    const std::string line = r.to_json_line();
    CHECK(line.find("\"eik\":0.5") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
}

TEST_SUITE_END();
