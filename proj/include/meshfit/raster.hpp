#pragma once

#include "meshfit/core.hpp"
#include "meshfit/isosurface.hpp"

namespace meshfit {

// ---------------------------------------------------------------------------
// Camera. Right-handed world; the camera looks down -z of its local frame,
// +x right, +y up. Pixel centers at (i+0.5, j+0.5), top-left origin.
// ---------------------------------------------------------------------------

struct Camera {
    Mat4 camera_to_world = Mat4::Identity();
    double fov_y = deg_to_rad(40.0);  // radians
    int width = 256;
    int height = 256;
    double near_clip = 0.05;
    double far_clip = 100.0;

    Mat3 rotation() const { return camera_to_world.topLeftCorner<3, 3>(); }
    Vec3 center() const { return camera_to_world.topRightCorner<3, 1>(); }

    /// Rotation orthonormal within 1e-6, 0 < near < far, fov in (0, pi).
    void validate() const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y,
                          int width, int height, double near_clip = 0.05,
                          double far_clip = 100.0);
};

/// Row-major flattening of camera_to_world; exact inverse via
/// camera_from_embedding.
Eigen::Matrix<double, 16, 1> camera_embedding(const Camera& camera);
Mat4 camera_from_embedding(const Eigen::Matrix<double, 16, 1>& zeta);

/// Camera JSON: {"camera_to_world": [16 row-major], "fov_y_deg", "width",
/// "height", "near", "far"}.
void save_camera_json(const Camera& camera, const std::string& path);
Camera load_camera_json(const std::string& path);

// ---------------------------------------------------------------------------
// G-buffer
// ---------------------------------------------------------------------------

struct GBuffer {
    int height = 0;
    int width = 0;
    Image mask;    // HxWx1, 1 where covered
    Image depth;   // HxWx1, view-space z distance; background = far
    Image normal;  // HxWx3, world space, unit where covered, 0 background
    Image coord;   // HxWx3, world-space position, 0 background
    std::vector<int32_t> prim_id;  // face index, -1 background
    Image bary;    // HxWx3 perspective-correct vertex weights (gradient path)

    bool covered(int y, int x) const { return mask.at(y, x) > 0.5; }
};

/// Hard z-buffer rasterization with perspective-correct attribute
/// interpolation. Back-face agnostic; nearest depth wins, ties to the lower
/// face index. Triangles with any vertex at non-positive view depth are
/// culled (no near-plane clipping).
GBuffer rasterize_gbuffer(const Mesh& mesh, const Camera& camera, int threads = 1);

/// Per-pixel rotation of camera-space normals (OpenGL convention: +x right,
/// +y up, +z toward viewer) into world space. Zero (background) pixels pass
/// through.
Image transform_normals_local_to_global(const Image& normal_map, const Camera& camera);

/// Inverse of the above; used to synthesize camera-space maps.
Image transform_normals_global_to_local(const Image& normal_map, const Camera& camera);

// ---------------------------------------------------------------------------
// View sampling
// ---------------------------------------------------------------------------

struct ViewSampleConfig {
    double radius = 2.5;
    double elevation_lo = deg_to_rad(-30.0);
    double elevation_hi = deg_to_rad(45.0);
    double fov_y = deg_to_rad(40.0);
    int width = 256;
    int height = 256;
    double near_clip = 0.05;
    double far_clip = 100.0;
};

/// Cameras on a sphere looking at the origin; azimuth uniform, elevation
/// uniform in the configured band; deterministic per seed.
std::vector<Camera> sample_views(int count, uint64_t seed,
                                 const ViewSampleConfig& config = {});

}  // namespace meshfit
