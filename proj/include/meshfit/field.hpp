#pragma once

#include "meshfit/core.hpp"

#include <array>
#include <optional>
#include <string>

namespace meshfit {

// ---------------------------------------------------------------------------
// MLP decoder heads.
// ---------------------------------------------------------------------------

enum class OutputKind { Linear, Sigmoid };

/// Dense decoder: squareplus hidden layers (algebraic softplus-style
/// rectifier), configurable output activation.
struct MlpParams {
    std::vector<MatX> weights;  // weights[l]: (out x in)
    std::vector<VecX> biases;
    OutputKind output = OutputKind::Linear;

    int input_width() const { return static_cast<int>(weights.front().cols()); }
    int output_width() const { return static_cast<int>(weights.back().rows()); }
    int num_layers() const { return static_cast<int>(weights.size()); }

    /// Layer shapes must compose and all parameters must be finite.
    void validate() const;

    static MlpParams random(const std::vector<int>& widths, OutputKind out, uint64_t seed);
};

// ---------------------------------------------------------------------------
// Triplane field: three axis-aligned feature planes + a decoder head.
// Plane 0 projects onto (x,y), plane 1 onto (x,z), plane 2 onto (y,z).
// Queries aggregate by SUM of the three bilinear plane samples. Out-of-domain
// queries clamp to the boundary.
// ---------------------------------------------------------------------------

struct TriplaneField {
    int plane_res = 0;  // square planes, plane_res x plane_res nodes
    int channels = 0;
    double domain_lo = -1.0;
    double domain_hi = 1.0;
    std::array<MatX, 3> planes;  // each: channels x (plane_res*plane_res); node = v*plane_res + u
    MlpParams decoder;

    static constexpr int kPlaneAxes[3][2] = {{0, 1}, {0, 2}, {1, 2}};

    int node_index(int u, int v) const { return v * plane_res + u; }
    int64_t param_count() const;

    /// Randomly initialized field. `hidden` lists hidden-layer widths
    /// (default two layers of 64).
    static TriplaneField create(int plane_res, int channels, const std::vector<int>& hidden,
                                OutputKind out, int out_width, uint64_t seed);
};

/// Parameter-shaped gradient accumulator for a TriplaneField.
struct FieldGrads {
    std::array<MatX, 3> planes;
    std::vector<MatX> weights;
    std::vector<VecX> biases;

    void init_like(const TriplaneField& f);
    void zero();
    void add(const FieldGrads& o);
    void scale(double s);
    double dot(const FieldGrads& o) const;  // inner product, used by gradient tests
};

// ---------------------------------------------------------------------------
// SDF grid: N^3 scalar samples over a box, x-fastest ordering.
// ---------------------------------------------------------------------------

struct SdfGrid {
    int resolution = 0;  // nodes per axis, >= 2
    Vec3 bbox_lo = Vec3(-1, -1, -1);
    Vec3 bbox_hi = Vec3(1, 1, 1);
    std::vector<double> values;  // idx = i + N*(j + N*k)

    SdfGrid() = default;
    SdfGrid(int n, const Vec3& lo, const Vec3& hi)
        : resolution(n), bbox_lo(lo), bbox_hi(hi),
          values(static_cast<size_t>(n) * n * n, 0.0) {}

    size_t index(int i, int j, int k) const {
        return static_cast<size_t>(i) +
               static_cast<size_t>(resolution) * (static_cast<size_t>(j) +
                                                  static_cast<size_t>(resolution) * k);
    }
    double& at(int i, int j, int k) { return values[index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }

    Vec3 lattice_point(int i, int j, int k) const {
        const double n1 = resolution - 1;
        return Vec3(bbox_lo.x() + (bbox_hi.x() - bbox_lo.x()) * (i / n1),
                    bbox_lo.y() + (bbox_hi.y() - bbox_lo.y()) * (j / n1),
                    bbox_lo.z() + (bbox_hi.z() - bbox_lo.z()) * (k / n1));
    }

    /// Edge length of one grid cell (cubic domains).
    double cell_size() const { return (bbox_hi.x() - bbox_lo.x()) / (resolution - 1); }

    /// Trilinear interpolation; out-of-box points clamp.
    double sample(const Vec3& p) const;
    /// Analytic gradient of the trilinear interpolant; at cell boundaries the
    /// lower-index cell's gradient is used.
    Vec3 gradient(const Vec3& p) const;
};

// ---------------------------------------------------------------------------
// Analytic signed distance shapes (ground-truth oracles).
// ---------------------------------------------------------------------------

struct AnalyticShape {
    enum class Kind { Sphere, Box, Torus };
    Kind kind = Kind::Sphere;
    double a = 0.5;  // sphere radius | box half-extent | torus major radius
    double b = 0.2;  // torus tube radius

    /// Parses "sphere:R", "box:H", "torus:R,r".
    static AnalyticShape parse(const std::string& spec);
};

/// Exact signed distance, negative inside. Throws on non-positive radii.
double analytic_sdf(const AnalyticShape& shape, const Vec3& p);

/// Bakes an analytic shape into a grid over the given box.
SdfGrid bake_analytic_grid(const AnalyticShape& shape, int resolution,
                           const Vec3& lo = Vec3(-1, -1, -1), const Vec3& hi = Vec3(1, 1, 1));

// ---------------------------------------------------------------------------
// Field queries.
// ---------------------------------------------------------------------------

/// Decoder forward on raw feature columns (no plane sampling).
MatX mlp_forward(const MlpParams& mlp, const MatX& input);

/// Sum of the three bilinear plane samples at p's axis-pair projections.
VecX sample_triplane(const TriplaneField& field, const Vec3& p);

/// Decoder applied to sample_triplane. Field must have a scalar head.
double query_sdf(const TriplaneField& field, const Vec3& p);

/// Analytic gradient of query_sdf with respect to p.
Vec3 sdf_gradient(const TriplaneField& field, const Vec3& p);

/// Batched decoder outputs, one column per point.
MatX field_eval(const TriplaneField& field, std::span<const Vec3> pts, int threads = 1);

/// Batched outputs plus spatial gradients: dvalues[j](o, m) = d out_o / d x_j at point m.
void field_eval_with_gradients(const TriplaneField& field, std::span<const Vec3> pts,
                               MatX& values, std::array<MatX, 3>& dvalues, int threads = 1);

/// Accumulates parameter gradients for sum_m value_bar(:,m) . out(:,m), and,
/// when dvalue_bar is non-null, + sum_{m,j} dvalue_bar[j](:,m) . (d out / d x_j)(:,m).
void field_backprop(const TriplaneField& field, std::span<const Vec3> pts,
                    const MatX& value_bar, const std::array<MatX, 3>* dvalue_bar,
                    FieldGrads& grads, int threads = 1);

/// Lattice bake of the scalar head over the field's domain cube.
SdfGrid bake_sdf_grid(const TriplaneField& field, int resolution, int threads = 1);

// ---------------------------------------------------------------------------
// Losses owned by this module.
// ---------------------------------------------------------------------------

/// Uniform points in the field's domain cube, counter-based per (seed, index).
std::vector<Vec3> eikonal_sample_points(const TriplaneField& field, int64_t count, uint64_t seed);

/// Mean of (|grad SDF| - 1)^2 over the given points.
double eikonal_loss_at(const TriplaneField& field, std::span<const Vec3> pts, int threads = 1);

/// Mean of (|grad SDF| - 1)^2 at `sample_count` uniform domain points
/// (200K default, per-step fits typically use fewer).
double eikonal_loss(const TriplaneField& field, int64_t sample_count = 200000,
                    uint64_t seed = 0, int threads = 1);

/// Eikonal loss over a trilinearly interpolated grid (used to study baked fields).
double eikonal_loss_grid(const SdfGrid& grid, int64_t sample_count, uint64_t seed);

/// Eikonal loss and its parameter gradient (accumulated into grads).
double eikonal_loss_backprop(const TriplaneField& field, std::span<const Vec3> pts,
                             FieldGrads& grads, int threads = 1);

/// Mean squared difference over grid vertices. Grids must match in shape and bbox.
double sdf_grid_loss(const SdfGrid& pred, const SdfGrid& gt);

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

/// Binary SDF grid: magic "DSDF", u32 version, u32 N, 6 x f64 bbox, N^3 LE f32,
/// x-fastest.
void save_sdf_grid(const SdfGrid& grid, const std::string& path);
SdfGrid load_sdf_grid(const std::string& path);

/// Triplane checkpoint: magic "TPFC", u32 version, shape header, f64 payload.
void save_triplane(const TriplaneField& field, const std::string& path);
TriplaneField load_triplane(const std::string& path);

}  // namespace meshfit
