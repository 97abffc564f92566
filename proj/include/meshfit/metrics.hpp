#pragma once

#include "meshfit/core.hpp"
#include "meshfit/isosurface.hpp"

namespace meshfit {

// ---------------------------------------------------------------------------
// Exact nearest-neighbor search (median-split kd-tree). Distances are
// computed the same way as the brute-force path, so the two agree exactly.
// ---------------------------------------------------------------------------

class KdTree3 {
  public:
    explicit KdTree3(std::span<const Vec3> points);

    /// Squared distance to the nearest stored point.
    double nearest_sq(const Vec3& query) const;
    /// Nearest stored point itself (for correspondence lookups).
    const Vec3& nearest_point(const Vec3& query) const;

    size_t size() const { return points_.size(); }

  private:
    struct Node {
        int axis = -1;       // -1 = leaf
        double split = 0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range in points_
    };
    int build(int begin, int end, int depth);
    void search(int node, const Vec3& q, double& best, int* best_index) const;

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// ---------------------------------------------------------------------------
// Mesh evaluation protocol.
// ---------------------------------------------------------------------------

/// Area-weighted uniform surface samples; deterministic per seed.
std::vector<Vec3> sample_surface_points(const Mesh& mesh, int64_t count, uint64_t seed);

/// Translates the bbox center to the origin and scales the bbox diagonal to 2.
Mesh normalize_mesh(const Mesh& mesh);

/// Applies normalize_mesh to both meshes (the protocol's "rescale and align").
std::pair<Mesh, Mesh> align_meshes(const Mesh& pred, const Mesh& gt);

/// Optional rigid ICP refinement of pred onto gt (point-to-point, Kabsch
/// updates on seeded surface samples). Off by default in the eval flow.
Mesh icp_refine(const Mesh& pred, const Mesh& gt, int iterations = 50,
                int64_t samples = 4000, uint64_t seed = 0);

/// Sum of the two directional mean L2 nearest-neighbor distances.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b, int threads = 1);
/// Reference path used to validate the accelerated one.
double chamfer_distance_bruteforce(std::span<const Vec3> a, std::span<const Vec3> b);

/// Harmonic mean of precision/recall at threshold tau; 0 when both are 0.
double f1_score(std::span<const Vec3> a, std::span<const Vec3> b, double tau = 0.1,
                int threads = 1);

// ---------------------------------------------------------------------------
// Image metrics ([0,1] range).
// ---------------------------------------------------------------------------

/// 10*log10(1/MSE), clamped to `cap` (identical images report the cap).
double psnr(const Image& pred, const Image& gt, double cap = 99.0);

/// PSNR over mask>0.5 pixels only.
double psnr_masked(const Image& pred, const Image& gt, const Image& mask, double cap = 99.0);

/// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
/// mean over valid windows and channels.
double ssim(const Image& pred, const Image& gt);

// ---------------------------------------------------------------------------
// Normal-prediction benchmark statistics (foreground pixels only, pooled
// across all images).
// ---------------------------------------------------------------------------

struct NormalBenchStats {
    double mean_deg = 0;
    double median_deg = 0;
    double pct_below_11_25 = 0;
    double pct_below_22_5 = 0;
    double pct_below_30 = 0;
    int64_t pixel_count = 0;
};

NormalBenchStats normal_benchmark(std::span<const Image> pred_normals,
                                  std::span<const Image> gt_normals,
                                  std::span<const Image> masks);

}  // namespace meshfit
