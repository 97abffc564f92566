#include "meshfit/shading.hpp"

#include <algorithm>
#include <cmath>

namespace meshfit {

namespace {

// Branchless orthonormal basis (Duff et al.) and its derivative with respect
// to the normal; the sign switch at n.z = 0 is measure-zero.
struct Onb {
    Vec3 t, b;
};

Onb make_onb(const Vec3& n) {
    const double s = std::copysign(1.0, n.z());
    const double a = -1.0 / (s + n.z());
    const double bxy = n.x() * n.y() * a;
    Onb o;
    o.t = Vec3(1.0 + s * n.x() * n.x() * a, s * bxy, -s * n.x());
    o.b = Vec3(bxy, s + n.y() * n.y() * a, -n.y());
    return o;
}

// Columns index the normal component; rows the basis-vector component.
void make_onb_grad(const Vec3& n, Mat3& dt_dn, Mat3& db_dn) {
    const double s = std::copysign(1.0, n.z());
    const double a = -1.0 / (s + n.z());
    const double a2 = a * a;
    const double nx = n.x(), ny = n.y();
    dt_dn << 2 * s * nx * a, 0, s * nx * nx * a2,
             s * ny * a, s * nx * a, s * nx * ny * a2,
             -s, 0, 0;
    db_dn << ny * a, nx * a, nx * ny * a2,
             0, 2 * ny * a, ny * ny * a2,
             0, -1, 0;
}

Vec3 cosine_sample(double u1, double u2) {
    const double r = std::sqrt(u1);
    const double phi = 2.0 * kPi * u2;
    return Vec3(r * std::cos(phi), r * std::sin(phi), std::sqrt(std::max(0.0, 1.0 - u1)));
}

Vec3 ggx_half_sample(double u1, double u2, double alpha) {
    const double cos_t = std::sqrt((1.0 - u1) / (1.0 + (alpha * alpha - 1.0) * u1));
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const double phi = 2.0 * kPi * u2;
    return Vec3(sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t);
}

double smith_g1(double x, double alpha) {
    const double q = std::sqrt(alpha * alpha + (1.0 - alpha * alpha) * x * x);
    return 2.0 * x / (x + q);
}

double smith_g1_dx(double x, double alpha) {
    const double q = std::sqrt(alpha * alpha + (1.0 - alpha * alpha) * x * x);
    const double xq = x + q;
    return 2.0 * alpha * alpha / (q * xq * xq);
}

uint64_t pixel_stream(uint64_t seed, uint64_t tag, int64_t pixel) {
    return hash_combine(hash_combine(seed, tag), static_cast<uint64_t>(pixel));
}

}  // namespace

// ---------------------------------------------------------------------------
// EnvironmentMap
// ---------------------------------------------------------------------------

void EnvironmentMap::validate() const {
    if (height < 1 || width != 2 * height)
        throw InputError("environment map must be lat-long with width = 2 * height");
    if (data.size() != static_cast<size_t>(height) * width * 3)
        throw InputError("environment map data size mismatch");
    for (double v : data)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InputError("environment map radiance must be finite and non-negative");
}

EnvironmentMap EnvironmentMap::constant(const Vec3& radiance, int height) {
    EnvironmentMap e;
    e.height = height;
    e.width = 2 * height;
    e.data.resize(static_cast<size_t>(e.height) * e.width * 3);
    for (int y = 0; y < e.height; ++y)
        for (int x = 0; x < e.width; ++x) e.set_texel(y, x, radiance);
    return e;
}

EnvironmentMap EnvironmentMap::procedural(uint64_t seed, int height) {
    Rng rng(hash_combine(seed, 0xe4f));
    const double ambient = 0.15 + 0.25 * rng.uniform();
    const int lobes = 2 + static_cast<int>(rng.below(3));
    std::vector<Vec3> ldir(lobes), lcol(lobes);
    std::vector<double> lsharp(lobes);
    for (int i = 0; i < lobes; ++i) {
        Vec3 d = rng.normal3();
        while (d.norm() < 1e-6) d = rng.normal3();
        ldir[i] = d.normalized();
        lcol[i] = Vec3(0.3 + 1.7 * rng.uniform(), 0.3 + 1.7 * rng.uniform(),
                       0.3 + 1.7 * rng.uniform());
        lsharp[i] = 4.0 + 60.0 * rng.uniform();
    }
    EnvironmentMap e;
    e.height = height;
    e.width = 2 * height;
    e.data.resize(static_cast<size_t>(e.height) * e.width * 3);
    for (int y = 0; y < e.height; ++y) {
        const double theta = (y + 0.5) / e.height * kPi;
        for (int x = 0; x < e.width; ++x) {
            const double phi = (x + 0.5) / e.width * 2.0 * kPi - kPi;
            const Vec3 dir(std::sin(theta) * std::cos(phi), std::cos(theta),
                           std::sin(theta) * std::sin(phi));
            Vec3 radiance = Vec3::Constant(ambient);
            for (int i = 0; i < lobes; ++i)
                radiance += lcol[i] * std::exp(lsharp[i] * (dir.dot(ldir[i]) - 1.0));
            e.set_texel(y, x, radiance);
        }
    }
    return e;
}

Vec3 sample_environment(const EnvironmentMap& env, const Vec3& dir, Mat3* d_radiance_d_dir) {
    const int W = env.width, H = env.height;
    const double phi = std::atan2(dir.z(), dir.x());
    const double y_clamped = std::clamp(dir.y(), -1.0, 1.0);
    const double theta = std::acos(y_clamped);
    const double u = (phi + kPi) / (2.0 * kPi);
    const double v = theta / kPi;

    const double tu = u * W - 0.5;
    const double tv = v * H - 0.5;
    int i0 = static_cast<int>(std::floor(tu));
    double fu = tu - i0;
    i0 = ((i0 % W) + W) % W;
    const int i1 = (i0 + 1) % W;
    int j0 = static_cast<int>(std::floor(tv));
    double fv = tv - j0;
    bool v_clamped = false;
    if (j0 < 0) {
        j0 = 0;
        fv = 0;
        v_clamped = true;
    } else if (j0 > H - 2) {
        j0 = H - 2;
        fv = 1;
        v_clamped = true;
    }
    const int j1 = j0 + 1;

    const Vec3 t00 = env.texel(j0, i0), t10 = env.texel(j0, i1);
    const Vec3 t01 = env.texel(j1, i0), t11 = env.texel(j1, i1);
    const Vec3 out = (1 - fu) * (1 - fv) * t00 + fu * (1 - fv) * t10 + (1 - fu) * fv * t01 +
                     fu * fv * t11;

    if (d_radiance_d_dir) {
        const Vec3 dL_dtu = (t10 - t00) * (1 - fv) + (t11 - t01) * fv;
        const Vec3 dL_dtv = v_clamped ? Vec3::Zero().eval() : ((t01 - t00) * (1 - fu) + (t11 - t10) * fu).eval();
        const double xz2 = dir.x() * dir.x() + dir.z() * dir.z();
        Vec3 dtu_ddir = Vec3::Zero();
        if (xz2 > 1e-24) {
            const double c = W / (2.0 * kPi * xz2);
            dtu_ddir = Vec3(-dir.z() * c, 0.0, dir.x() * c);
        }
        Vec3 dtv_ddir = Vec3::Zero();
        const double sin_t = std::sqrt(std::max(0.0, 1.0 - y_clamped * y_clamped));
        if (sin_t > 1e-9) dtv_ddir = Vec3(0.0, -H / (kPi * sin_t), 0.0);
        *d_radiance_d_dir = dL_dtu * dtu_ddir.transpose() + dL_dtv * dtv_ddir.transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Materials and conditions
// ---------------------------------------------------------------------------

Material Material::clamped(double metallic, double roughness) {
    Material m;
    m.metallic = std::clamp(metallic, 0.0, 1.0);
    m.roughness = std::clamp(roughness, 0.03, 1.0);
    return m;
}

PbrCondition sample_pbr_condition(uint64_t seed, int env_pool_size) {
    if (env_pool_size < 1) throw InputError("sample_pbr_condition: empty environment pool");
    Rng rng(hash_combine(seed, 0xc02d));
    PbrCondition c;
    c.env_id = static_cast<int>(rng.below(static_cast<uint64_t>(env_pool_size)));
    c.material = Material::clamped(rng.uniform(), rng.uniform(0.03, 1.0));
    return c;
}

std::vector<EnvironmentMap> make_environment_pool(int count, uint64_t seed, int height) {
    std::vector<EnvironmentMap> pool;
    pool.reserve(count);
    for (int i = 0; i < count; ++i)
        pool.push_back(EnvironmentMap::procedural(hash_combine(seed, 0xe57 + i), height));
    return pool;
}

// ---------------------------------------------------------------------------
// Light maps
// ---------------------------------------------------------------------------

namespace {

Image render_diffuse_impl(const GBuffer& gb, const EnvironmentMap& env, const Material& mat,
                          uint64_t seed, const ShadingOptions& opt, Image* dpix_dn) {
    env.validate();
    const int H = gb.height, W = gb.width;
    Image out(H, W, 3, 0.0);
    if (dpix_dn) *dpix_dn = Image(H, W, 9, 0.0);
    const double scale = 1.0 - std::clamp(mat.metallic, 0.0, 1.0);
    if (scale == 0.0) return out;
    const int S = std::max(1, opt.samples);

    parallel_chunks(H, 8, opt.threads, [&](int64_t yb, int64_t ye) {
        for (int y = static_cast<int>(yb); y < ye; ++y) {
            for (int x = 0; x < W; ++x) {
                if (!gb.covered(y, x)) continue;
                const Vec3 n = gb.normal.pixel3(y, x);
                const Onb onb = make_onb(n);
                Mat3 dt_dn, db_dn;
                if (dpix_dn) make_onb_grad(n, dt_dn, db_dn);
                Rng rng(pixel_stream(seed, 0xd1ffu, static_cast<int64_t>(y) * W + x));
                Vec3 acc = Vec3::Zero();
                Mat3 dacc = Mat3::Zero();
                for (int s = 0; s < S; ++s) {
                    const double u1 = rng.uniform(), u2 = rng.uniform();
                    const Vec3 local = cosine_sample(u1, u2);
                    const Vec3 w = local.x() * onb.t + local.y() * onb.b + local.z() * n;
                    if (dpix_dn) {
                        Mat3 denv;
                        acc += sample_environment(env, w, &denv);
                        const Mat3 dw_dn =
                            local.x() * dt_dn + local.y() * db_dn + local.z() * Mat3::Identity();
                        dacc += denv * dw_dn;
                    } else {
                        acc += sample_environment(env, w);
                    }
                }
                out.set_pixel3(y, x, scale / S * acc);
                if (dpix_dn) {
                    const Mat3 m = scale / S * dacc;
                    for (int r = 0; r < 3; ++r)
                        for (int c = 0; c < 3; ++c) dpix_dn->at(y, x, r * 3 + c) = m(r, c);
                }
            }
        }
    });
    return out;
}

Image render_specular_impl(const GBuffer& gb, const EnvironmentMap& env, const Material& mat,
                           const Camera& cam, uint64_t seed, const ShadingOptions& opt,
                           Image* dpix_dn) {
    env.validate();
    const int H = gb.height, W = gb.width;
    Image out(H, W, 3, 0.0);
    if (dpix_dn) *dpix_dn = Image(H, W, 9, 0.0);
    const Material m = Material::clamped(mat.metallic, mat.roughness);
    const double alpha = m.roughness * m.roughness;
    const double f0 = 0.04 + 0.96 * m.metallic;
    const Vec3 eye = cam.center();
    const int S = std::max(1, opt.samples);
    constexpr double kDotFloor = 1e-4;

    parallel_chunks(H, 8, opt.threads, [&](int64_t yb, int64_t ye) {
        for (int y = static_cast<int>(yb); y < ye; ++y) {
            for (int x = 0; x < W; ++x) {
                if (!gb.covered(y, x)) continue;
                const Vec3 n = gb.normal.pixel3(y, x);
                const Vec3 p = gb.coord.pixel3(y, x);
                Vec3 v = eye - p;
                const double vlen = v.norm();
                if (vlen < 1e-12) continue;
                v /= vlen;
                const Onb onb = make_onb(n);
                Mat3 dt_dn, db_dn;
                if (dpix_dn) make_onb_grad(n, dt_dn, db_dn);
                Rng rng(pixel_stream(seed, 0x5becu, static_cast<int64_t>(y) * W + x));
                Vec3 acc = Vec3::Zero();
                Mat3 dacc = Mat3::Zero();
                for (int s = 0; s < S; ++s) {
                    const double u1 = rng.uniform(), u2 = rng.uniform();
                    const Vec3 hl = ggx_half_sample(u1, u2, alpha);
                    const Vec3 h = hl.x() * onb.t + hl.y() * onb.b + hl.z() * n;
                    const double vh_raw = v.dot(h);
                    const Vec3 l = 2.0 * vh_raw * h - v;
                    const double nl = n.dot(l);
                    if (nl <= 0.0) continue;
                    const double nv_raw = n.dot(v);
                    const double nh_raw = n.dot(h);
                    const double vh = std::max(vh_raw, kDotFloor);
                    const double nv = std::max(nv_raw, kDotFloor);
                    const double nh = std::max(nh_raw, kDotFloor);
                    const double fres = f0 + (1.0 - f0) * std::pow(1.0 - vh, 5.0);
                    const double g1v = smith_g1(nv, alpha);
                    const double g1l = smith_g1(nl, alpha);
                    const double wgt = fres * g1v * g1l * vh / (nv * nh);
                    if (dpix_dn) {
                        Mat3 denv;
                        const Vec3 radiance = sample_environment(env, l, &denv);
                        acc += radiance * wgt;

                        const Mat3 dh_dn =
                            hl.x() * dt_dn + hl.y() * db_dn + hl.z() * Mat3::Identity();
                        const Eigen::RowVector3d dvh_dn = v.transpose() * dh_dn;
                        const Mat3 dl_dn = 2.0 * (h * dvh_dn + vh_raw * dh_dn);
                        const Eigen::RowVector3d dnl_dn = l.transpose() + n.transpose() * dl_dn;
                        const Eigen::RowVector3d dnv_dn =
                            nv_raw > kDotFloor ? Eigen::RowVector3d(v.transpose())
                                               : Eigen::RowVector3d::Zero().eval();
                        const Eigen::RowVector3d dnh_dn =
                            nh_raw > kDotFloor
                                ? Eigen::RowVector3d(h.transpose() + n.transpose() * dh_dn)
                                : Eigen::RowVector3d::Zero().eval();
                        const Eigen::RowVector3d dvh_eff =
                            vh_raw > kDotFloor ? dvh_dn : Eigen::RowVector3d::Zero().eval();

                        const double dfres = -5.0 * (1.0 - f0) * std::pow(1.0 - vh, 4.0);
                        const Eigen::RowVector3d dg_dn =
                            smith_g1_dx(nv, alpha) * g1l * dnv_dn +
                            g1v * smith_g1_dx(nl, alpha) * dnl_dn;
                        Eigen::RowVector3d dwgt_dn =
                            dfres * dvh_eff * (g1v * g1l * vh / (nv * nh)) +
                            fres * dg_dn * (vh / (nv * nh)) +
                            fres * g1v * g1l * dvh_eff / (nv * nh) -
                            (fres * g1v * g1l * vh / (nv * nv * nh * nh)) *
                                (dnv_dn * nh + nv * dnh_dn);
                        dacc += radiance * dwgt_dn + wgt * (denv * dl_dn);
                    } else {
                        acc += sample_environment(env, l) * wgt;
                    }
                }
                out.set_pixel3(y, x, acc / S);
                if (dpix_dn) {
                    const Mat3 dm = dacc / S;
                    for (int r = 0; r < 3; ++r)
                        for (int c = 0; c < 3; ++c) dpix_dn->at(y, x, r * 3 + c) = dm(r, c);
                }
            }
        }
    });
    return out;
}

}  // namespace

Image render_diffuse(const GBuffer& gbuffer, const EnvironmentMap& env, const Material& material,
                     uint64_t seed, const ShadingOptions& options) {
    return render_diffuse_impl(gbuffer, env, material, seed, options, nullptr);
}

Image render_specular(const GBuffer& gbuffer, const EnvironmentMap& env,
                      const Material& material, const Camera& view_camera, uint64_t seed,
                      const ShadingOptions& options) {
    return render_specular_impl(gbuffer, env, material, view_camera, seed, options, nullptr);
}

Image render_diffuse_with_grad(const GBuffer& gbuffer, const EnvironmentMap& env,
                               const Material& material, uint64_t seed,
                               const ShadingOptions& options, Image& d_pixel_d_normal) {
    return render_diffuse_impl(gbuffer, env, material, seed, options, &d_pixel_d_normal);
}

Image render_specular_with_grad(const GBuffer& gbuffer, const EnvironmentMap& env,
                                const Material& material, const Camera& view_camera,
                                uint64_t seed, const ShadingOptions& options,
                                Image& d_pixel_d_normal) {
    return render_specular_impl(gbuffer, env, material, view_camera, seed, options,
                                &d_pixel_d_normal);
}

}  // namespace meshfit
