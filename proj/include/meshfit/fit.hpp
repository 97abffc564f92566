#pragma once

#include "meshfit/field.hpp"
#include "meshfit/isosurface.hpp"
#include "meshfit/losses.hpp"
#include "meshfit/raster.hpp"

#include <map>
#include <optional>

namespace meshfit {

// ---------------------------------------------------------------------------
// Adam over triplane-field parameters.
// ---------------------------------------------------------------------------

struct AdamState {
    FieldGrads m, v;
    int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init_like(const TriplaneField& f);
    void step(TriplaneField& f, const FieldGrads& g, double lr);
};

// ---------------------------------------------------------------------------
// Geometry fit: direct optimization of the SDF field against the geometry
// loss suite (the desk-scale stand-in for the feed-forward network).
// ---------------------------------------------------------------------------

struct GeometryFitConfig {
    std::string target = "sphere:0.5";  // analytic shape spec; ignored when GT passed explicitly
    // Explicit GT pair (both or neither); takes precedence over `target`.
    std::string target_mesh_path;
    std::string target_grid_path;

    // Field shape (the module-level decoder default is 2x64; the fit default
    // is sized for CPU-scale runs).
    int grid_res = 48;
    int plane_res = 32;
    int channels = 12;
    std::vector<int> hidden = {32, 32};

    // Loop.
    int iters = 2000;
    double lr = 4e-4;
    uint64_t seed = 0;
    int threads = 1;

    // Terms.
    bool use_eik = true, use_sdf = true;
    bool use_spec = false, use_diff = false;
    bool use_nor = false, use_dep = false, use_mask = false;
    GeometryWeights weights;
    int64_t eik_samples = 8192;  // per step; the eikonal_loss *operation* defaults to 200000
    int64_t sdf_batch = 0;       // lattice vertices per step; 0 = all

    // Rendering terms.
    int views_per_step = 2;
    int render_res = 128;
    int pbr_conditions = 2;
    int pbr_spp = 16;
    bool pbr_proxy = false;  // include the perceptual term in the light-map losses
    int env_pool = 10;
    double camera_radius = 2.5;
    double fov_y = deg_to_rad(40.0);
    double elevation_lo = deg_to_rad(-30.0);
    double elevation_hi = deg_to_rad(45.0);
    double zeta_noise = 0.0;          // camera-embedding jitter (default off)
    double normal_noise_sigma = 0.0;  // noise on GT normal-map supervision

    // Initialization: warm-start regression toward a sphere of radius 0.5
    // unless an explicit field is supplied.
    int warmstart_iters = 400;
    int64_t warmstart_samples = 4096;
    double warmstart_lr = 1e-2;
    std::optional<TriplaneField> init_field;
};

struct GeometryFitResult {
    TriplaneField field;
    Mesh mesh;
    std::vector<LossReport> trace;
    bool diverged = false;
};

/// Fit against an analytic target named in config.target.
GeometryFitResult fit_geometry(const GeometryFitConfig& config);
/// Fit against an explicit GT grid + mesh.
GeometryFitResult fit_geometry(const GeometryFitConfig& config, const SdfGrid& gt_grid,
                               Mesh gt_mesh);

/// Seeded random field warm-started toward the analytic sphere SDF.
TriplaneField init_sdf_field(const GeometryFitConfig& config);

// ---------------------------------------------------------------------------
// Texture fit: RGB supervision only, geometry frozen.
// ---------------------------------------------------------------------------

struct TextureFitConfig {
    int plane_res = 48;
    int channels = 16;
    std::vector<int> hidden = {64, 64};
    int iters = 1200;
    double lr = 5e-3;
    uint64_t seed = 0;
    int threads = 1;
    bool include_proxy = true;
    std::optional<TriplaneField> init_field;
};

struct TextureFitResult {
    TriplaneField field;
    std::vector<LossReport> trace;
    bool diverged = false;
};

TextureFitResult fit_texture(const Mesh& mesh, std::span<const Camera> cameras,
                             std::span<const Image> target_views,
                             const TextureFitConfig& config);

// ---------------------------------------------------------------------------
// Input perturbation (robustness knob for normal-map supervision).
// ---------------------------------------------------------------------------

/// Adds sigma-scaled Gaussian noise to each foreground normal and
/// renormalizes; background zeros pass through. Deterministic per seed.
Image perturb_normals(const Image& normal_map, double sigma, uint64_t seed);

// ---------------------------------------------------------------------------
// Config files: "key = value" lines, '#' comments. Unknown keys are errors.
// ---------------------------------------------------------------------------

std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config(GeometryFitConfig& config, const std::map<std::string, std::string>& kv);
void apply_config(TextureFitConfig& config, const std::map<std::string, std::string>& kv);

/// JSONL trace dump (one LossReport per line).
void save_trace(std::span<const LossReport> trace, const std::string& path);

}  // namespace meshfit
