#pragma once

#include "meshfit/core.hpp"
#include "meshfit/raster.hpp"

namespace meshfit {

// ---------------------------------------------------------------------------
// Environment maps: equirectangular (lat-long) radiance, width = 2 * height.
// Direction convention: u wraps azimuth (atan2(z, x)), v maps the polar angle
// from +y (v = 0) to -y (v = 1).
// ---------------------------------------------------------------------------

struct EnvironmentMap {
    int height = 0;
    int width = 0;
    std::vector<double> data;  // HxWx3 linear radiance

    Vec3 texel(int y, int x) const {
        const size_t i = (static_cast<size_t>(y) * width + x) * 3;
        return Vec3(data[i], data[i + 1], data[i + 2]);
    }
    void set_texel(int y, int x, const Vec3& v) {
        const size_t i = (static_cast<size_t>(y) * width + x) * 3;
        data[i] = v.x();
        data[i + 1] = v.y();
        data[i + 2] = v.z();
    }

    /// Non-negative finite radiance, width = 2 * height.
    void validate() const;

    static EnvironmentMap constant(const Vec3& radiance, int height = 8);
    /// Smooth random lighting: ambient base plus a few colored lobes.
    static EnvironmentMap procedural(uint64_t seed, int height = 32);
};

/// Bilinear lat-long lookup, seam-correct in azimuth. dir must be unit length.
/// When d_radiance_d_dir is non-null it receives the 3x3 Jacobian of the
/// lookup with respect to the direction.
Vec3 sample_environment(const EnvironmentMap& env, const Vec3& dir,
                        Mat3* d_radiance_d_dir = nullptr);

// ---------------------------------------------------------------------------
// Materials
// ---------------------------------------------------------------------------

struct Material {
    double metallic = 0.0;
    double roughness = 0.5;

    /// Clamps metallic to [0,1] and floors roughness at 0.03.
    static Material clamped(double metallic, double roughness);
};

struct PbrCondition {
    int env_id = 0;
    Material material;
};

/// Uniform draw: env index from the pool, metallic ~ U[0,1],
/// roughness ~ U[0.03,1]. Deterministic per seed.
PbrCondition sample_pbr_condition(uint64_t seed, int env_pool_size);

/// Deterministic pool of procedural environments.
std::vector<EnvironmentMap> make_environment_pool(int count, uint64_t seed, int height = 32);

// ---------------------------------------------------------------------------
// Light maps. White albedo throughout: the maps depend on geometry, lighting
// and material only. Per-pixel sample streams are keyed on (seed, pixel), so
// images are deterministic under any parallel schedule.
// ---------------------------------------------------------------------------

struct ShadingOptions {
    int samples = 64;
    int threads = 1;
};

/// Lambertian diffuse light map, scaled by (1 - metallic); cosine-weighted
/// Monte Carlo over the environment.
Image render_diffuse(const GBuffer& gbuffer, const EnvironmentMap& env, const Material& material,
                     uint64_t seed, const ShadingOptions& options = {});

/// Cook-Torrance GGX specular light map (Smith geometry, Schlick Fresnel,
/// F0 = mix(0.04, 1, metallic)); GGX importance sampling over the environment.
Image render_specular(const GBuffer& gbuffer, const EnvironmentMap& env,
                      const Material& material, const Camera& view_camera, uint64_t seed,
                      const ShadingOptions& options = {});

/// As above, but also produce d(pixel rgb)/d(pixel normal) as an HxWx9 image
/// (row-major 3x3 per pixel), differentiating the estimator at fixed sample
/// randoms. Used by the geometry fit.
Image render_diffuse_with_grad(const GBuffer& gbuffer, const EnvironmentMap& env,
                               const Material& material, uint64_t seed,
                               const ShadingOptions& options, Image& d_pixel_d_normal);
Image render_specular_with_grad(const GBuffer& gbuffer, const EnvironmentMap& env,
                                const Material& material, const Camera& view_camera,
                                uint64_t seed, const ShadingOptions& options,
                                Image& d_pixel_d_normal);

}  // namespace meshfit
